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

#ifndef OMNI_EVALUATION_HPP
#define OMNI_EVALUATION_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "omni/markov.hpp"
#include "omni/model_io.hpp"
#include "omni/refinement.hpp"

namespace omni {

struct SweepResult {
  std::string id;
  std::vector<double> grid;
  std::vector<double> values;
  bool refined = false;
};

/// 0, step, 2 step, ..., ending exactly at tmax.
std::vector<double> sweep_grid(double tmax, double step = 0.05);

/// Translates the interval down by `shift`; nullopt when the whole interval
/// falls before the shift (the property value is then exactly 0).
std::optional<UntilProperty> shifted(const UntilProperty &prop, double shift);

double evaluate_property(const Ctmc &model, const PropertyExpr &expr,
                         double time_shift = 0.0);

SweepResult evaluate_property_sweep(const Ctmc &model, const PropertyTemplate &prop,
                                    const std::vector<double> &grid,
                                    double time_shift = 0.0);
SweepResult evaluate_property_sweep(const RefinedModel &model,
                                    const PropertyTemplate &prop,
                                    const std::vector<double> &grid);

/// Fraction of traces satisfying the until formula; labels are resolved
/// against `model`, whose state names match the trace components.
double empirical_property_value(const Ctmc &model, const std::vector<TimedTrace> &traces,
                                const UntilProperty &prop);
double empirical_property_value(const Ctmc &model, const std::vector<TimedTrace> &traces,
                                const PropertyExpr &expr);
SweepResult empirical_sweep(const Ctmc &model, const std::vector<TimedTrace> &traces,
                            const PropertyTemplate &prop, const std::vector<double> &grid);

struct ErrorReport {
  double error = 0.0;
  std::vector<double> differences;
  double t_max = 0.0;
};

/// Trapezoidal area between the curves over [grid.front(), t_max].
ErrorReport error_area(const std::vector<double> &grid, const std::vector<double> &actual,
                       const std::vector<double> &predicted, double t_max);
ErrorReport error_area(const SweepResult &actual, const SweepResult &predicted);

struct TransitionEstimate {
  std::vector<std::map<StateIndex, double>> probability;
  std::vector<std::size_t> departures;
  std::vector<bool> undefined;  // never departed, so no estimate
};

TransitionEstimate estimate_transition_probabilities(const Ctmc &model,
                                                     const std::vector<TimedTrace> &traces);

/// Walks the jump chain of `skeleton`, resampling sojourns from the raw
/// observed durations of each component.
std::vector<TimedTrace> bootstrap_traces(const Ctmc &skeleton,
                                         const ObservationMap &observations,
                                         std::size_t n, std::uint64_t seed);

std::string format_results_csv(const SweepResult &result);
SweepResult parse_results_csv(const std::string &text);

}  // namespace omni

#endif  // OMNI_EVALUATION_HPP
