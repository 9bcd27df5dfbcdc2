/*
 * Copyright 2026 The omni-refine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef OMNI_REFINEMENT_HPP
#define OMNI_REFINEMENT_HPP

#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "omni/classification.hpp"
#include "omni/fitting.hpp"
#include "omni/markov.hpp"

namespace omni {

struct RefinementConfig {
  double epsilon = 0.1;
  double tail_probability = 0.05;
  double delay_threshold = 0.0;
  FitConfig fit;

  void validate() const;
  std::uint64_t hash() const;
};

/// Smallest k >= 1 whose Erlang-k delay model finishes within a fraction
/// (1 - epsilon) of its mean with probability at most p.
long solve_erlang_phase_count(double epsilon, double p);

struct ErlangDelayModel {
  double joint_delay = 0.0;
  long phases = 0;
  double erlang_rate = 0.0;
  // infinite when the member's whole mean is delay (it becomes vanishing)
  std::vector<double> adjusted_rates;
};

/// `rates` are the members' exit rates, `delays` the (thresholded) delays.
ErlangDelayModel erlang_delay_model(const std::vector<double> &rates,
                                    const std::vector<double> &delays,
                                    const RefinementConfig &cfg);

enum class RefinedRole { Copy, DelayPhase, PhdPhase };
std::string to_string(RefinedRole role);

struct StateOrigin {
  std::string component;
  RefinedRole role = RefinedRole::Copy;
};

struct RefinedModel {
  Ctmc ctmc;
  double time_shift = 0.0;
  std::vector<StateOrigin> provenance;  // one per refined state
  StatePartition partition;
};

Ctmc apply_joint_delay_model(const Ctmc &model, const StateSequence &seq,
                             const std::vector<ComponentStats> &stats,
                             const RefinementConfig &cfg);

Ctmc apply_phd_replacement(const Ctmc &model, StateIndex target,
                           const HyperErlangPhd &phd);

/// Removes a non-absorbing state that takes no time, rerouting its
/// incoming flow and initial mass by its jump probabilities.
Ctmc eliminate_vanishing_state(const Ctmc &model, StateIndex state);

/// Holding-time fits shared across refinements. Concurrent requests for the
/// same key wait for a single fit.
class FitCache {
 public:
  using Fitter = std::function<FitResult()>;

  std::shared_ptr<const FitResult> get_or_fit(const std::string &component,
                                              const std::string &role,
                                              std::uint64_t config_hash,
                                              const Fitter &fit);
  std::size_t fits() const;
  std::size_t hits() const;

 private:
  using Key = std::tuple<std::string, std::string, std::uint64_t>;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_future<std::shared_ptr<const FitResult>>> entries_;
  std::size_t fits_ = 0;
  std::size_t hits_ = 0;
};

using ObservationMap = std::map<std::string, ObservationSet>;

RefinedModel refine_for_property(const Ctmc &model, const PropertyExpr &expr,
                                 const ObservationMap &observations,
                                 const RefinementConfig &cfg, FitCache &cache);

RefinedModel refine_for_property(const Ctmc &model, const UntilProperty &prop,
                                 const ObservationMap &observations,
                                 const RefinementConfig &cfg, FitCache &cache);

}  // namespace omni

#endif  // OMNI_REFINEMENT_HPP
