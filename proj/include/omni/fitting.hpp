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

#ifndef OMNI_FITTING_HPP
#define OMNI_FITTING_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "omni/markov.hpp"

namespace omni {

struct ObservationSet {
  std::string component;
  std::vector<double> durations;
  TimeUnit unit = TimeUnit::Seconds;

  void validate() const;
};

struct ComponentStats {
  std::string component;
  double rate = 0.0;   // n / sum
  double delay = 0.0;  // sample minimum
  std::vector<double> holdings;
  TimeUnit unit = TimeUnit::Seconds;
};

ComponentStats estimate_component_stats(const ObservationSet &obs);

struct ErlangBranch {
  double weight = 1.0;
  long phases = 1;
  double rate = 1.0;

  double mean() const { return static_cast<double>(phases) / rate; }
};

/// Mixture of independent Erlang branches. Phases are numbered branch by
/// branch; each branch is a chain entered at its first phase.
class HyperErlangPhd {
 public:
  explicit HyperErlangPhd(std::vector<ErlangBranch> branches);

  const std::vector<ErlangBranch> &branches() const { return branches_; }
  std::size_t branch_count() const { return branches_.size(); }
  std::size_t phase_count() const;
  double mean() const;
  double cdf(double x) const;

  std::vector<double> initial_vector() const;
  // dense, only meant for small phase counts
  std::vector<std::vector<double>> generator() const;
  std::vector<double> exit_vector() const;

 private:
  std::vector<ErlangBranch> branches_;
};

struct FitConfig {
  double alpha = 0.1;
  int min_clusters = 2;
  int max_clusters = 30;
  long max_phases = 300;
  int max_steps = 3;
  int em_iterations = 50;
  double em_tolerance = 1e-6;
  std::uint64_t seed = 1;

  void validate() const;
  std::uint64_t hash() const;
};

struct FitCandidate {
  int clusters = 0;
  double distance = 0.0;
};

/// `phd` is empty exactly when the sample is degenerate (all zero), in which
/// case the caller should treat the component as a pure delay.
struct FitResult {
  std::optional<HyperErlangPhd> phd;
  double distance = 0.0;
  std::vector<FitCandidate> candidates;

  bool degenerate() const { return !phd.has_value(); }
};

FitResult fit_holding_phd(const std::vector<double> &holdings,
                          const FitConfig &cfg);

/// One cluster-based fit with exactly `clusters` k-means groups (fewer if
/// some end up empty or collapse onto zero).
HyperErlangPhd fit_clusters(const std::vector<double> &sorted, int clusters,
                            const FitConfig &cfg);

/// Mean |(i - 0.5)/n - F(x_i)| over the sorted sample.
double cdf_distance(const std::vector<double> &sorted, const HyperErlangPhd &phd);

std::vector<std::vector<double>> correlation_matrix(
    const std::vector<std::vector<double>> &series);

}  // namespace omni

#endif  // OMNI_FITTING_HPP
