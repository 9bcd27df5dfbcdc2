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

#ifndef OMNI_MODEL_IO_HPP
#define OMNI_MODEL_IO_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "omni/fitting.hpp"
#include "omni/markov.hpp"
#include "omni/refinement.hpp"

namespace omni {

/// Parsed model before rates are known: jump probabilities per state plus
/// any inline exit rates.
struct ModelSkeleton {
  std::vector<std::string> states;
  std::vector<double> initial;
  std::vector<std::vector<Transition>> jumps;  // `rate` holds a probability
  std::vector<std::optional<double>> exit_rate;
  std::vector<std::set<std::string>> labels;
  std::map<std::string, double> constants;
  TimeUnit unit = TimeUnit::Seconds;
  double time_shift = 0.0;

  /// Transient states whose rate must come from observations.
  std::vector<std::string> deferred() const;

  /// Requires every transient state to carry an inline rate.
  Ctmc build() const;
  /// Inline rates win; deferred ones are looked up by component label.
  Ctmc bind(const std::map<std::string, double> &rates) const;
  /// Unit exit rates: only the jump structure is meaningful.
  Ctmc jump_chain() const;
};

ModelSkeleton parse_model(const std::string &text,
                          const std::map<std::string, double> &overrides = {});
ModelSkeleton read_model(const std::filesystem::path &path,
                         const std::map<std::string, double> &overrides = {});

/// PRISM-style text; `time_shift` is written as a `shift` clause when > 0.
std::string export_ctmc(const Ctmc &model, double time_shift = 0.0);

struct ConfigDoc {
  std::map<std::string, std::filesystem::path> components;
  TimeUnit unit = TimeUnit::Seconds;
  RefinementConfig refinement;
  std::map<std::string, double> constants;
};

/// Relative observation paths are resolved against `base_dir`.
ConfigDoc parse_config(const std::string &json_text,
                       const std::filesystem::path &base_dir);
ConfigDoc load_config(const std::filesystem::path &path);

ObservationSet parse_observations(const std::string &text,
                                  const std::string &component, TimeUnit unit,
                                  const std::string &origin = "<input>");
ObservationSet read_observations(const std::filesystem::path &path,
                                 const std::string &component, TimeUnit unit);
ObservationMap load_observations(const ConfigDoc &config);

/// JSON Lines: {"steps":[{"component":..,"duration":..}],"outcome":..}.
std::vector<TimedTrace> parse_traces(const std::string &text, const Ctmc &model);
std::vector<TimedTrace> read_traces(const std::filesystem::path &path,
                                    const Ctmc &model);
std::string format_traces(const Ctmc &model, const std::vector<TimedTrace> &traces);

StateFormula parse_state_formula(const std::string &text);

/// Interval bound that is either a number or the sweep parameter T.
struct Bound {
  double value = 0.0;
  bool parameter = false;

  double at(double t) const { return parameter ? t : value; }
};

struct UntilTemplate {
  StateFormula phi1 = StateFormula::truth();
  StateFormula phi2 = StateFormula::truth();
  Bound lower, upper{kInfinity, false};
  bool lower_open = false;
  bool upper_open = false;

  UntilProperty at(double t) const;
  bool uses_parameter() const { return lower.parameter || upper.parameter; }
};

struct PropertyTemplate {
  struct Term {
    double coefficient = 1.0;
    UntilTemplate until;
  };
  std::string name;
  std::string text;
  std::vector<Term> terms;

  PropertyExpr at(double t) const;
};

PropertyTemplate parse_property(const std::string &text);
/// One property per non-empty line; `#` and `//` start comments.
std::vector<PropertyTemplate> parse_property_file(const std::string &text);

std::string read_text_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, const std::string &text);

}  // namespace omni

#endif  // OMNI_MODEL_IO_HPP
