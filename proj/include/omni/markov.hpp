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

#ifndef OMNI_MARKOV_HPP
#define OMNI_MARKOV_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace omni {

using StateIndex = std::size_t;

enum class TimeUnit { Seconds, Hours };

std::string to_string(TimeUnit unit);
TimeUnit parse_time_unit(const std::string &text);

struct Transition {
  StateIndex target;
  double rate;
};

/// Labelled continuous-time Markov chain with a sparse rate matrix.
///
/// Rows hold only off-diagonal positive rates; the diagonal is implied as the
/// negated exit rate. Each state also satisfies an atomic proposition equal to
/// its own name.
class Ctmc {
 public:
  Ctmc() = default;
  Ctmc(std::vector<std::string> names, std::vector<double> initial,
       std::vector<std::vector<Transition>> rows,
       std::vector<std::set<std::string>> labels,
       TimeUnit unit = TimeUnit::Seconds);

  std::size_t size() const { return names_.size(); }
  std::size_t transition_count() const;

  const std::string &name(StateIndex s) const { return names_[s]; }
  const std::vector<std::string> &names() const { return names_; }
  std::optional<StateIndex> find(const std::string &name) const;
  StateIndex index_of(const std::string &name) const;

  const std::vector<double> &initial() const { return initial_; }
  double initial(StateIndex s) const { return initial_[s]; }

  std::span<const Transition> transitions(StateIndex s) const {
    return rows_[s];
  }
  const std::vector<std::vector<Transition>> &rows() const { return rows_; }
  double rate(StateIndex from, StateIndex to) const;
  double exit_rate(StateIndex s) const { return exit_[s]; }
  double diagonal(StateIndex s) const { return -exit_[s]; }
  double max_exit_rate() const;
  bool is_absorbing(StateIndex s) const { return rows_[s].empty(); }

  const std::set<std::string> &labels(StateIndex s) const {
    return labels_[s];
  }
  const std::vector<std::set<std::string>> &all_labels() const {
    return labels_;
  }
  bool satisfies(StateIndex s, const std::string &proposition) const;

  TimeUnit unit() const { return unit_; }

 private:
  std::vector<std::string> names_;
  std::vector<double> initial_;
  std::vector<std::vector<Transition>> rows_;
  std::vector<double> exit_;
  std::vector<std::set<std::string>> labels_;
  std::unordered_map<std::string, StateIndex> index_;
  TimeUnit unit_ = TimeUnit::Seconds;
};

/// Non-probabilistic state formula over atomic propositions.
class StateFormula {
 public:
  static StateFormula truth();
  static StateFormula falsity();
  static StateFormula atom(std::string proposition);
  static StateFormula negation(StateFormula operand);
  static StateFormula conjunction(StateFormula lhs, StateFormula rhs);
  static StateFormula disjunction(StateFormula lhs, StateFormula rhs);

  StateFormula();

  bool holds(const Ctmc &model, StateIndex s) const;
  std::vector<bool> mask(const Ctmc &model) const;
  std::string to_string() const;

  /// Atomic propositions referenced anywhere in the formula.
  std::set<std::string> propositions() const;

 private:
  struct Node;
  explicit StateFormula(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct TimeInterval {
  double lower = 0.0;
  double upper = kInfinity;
  bool lower_open = false;
  bool upper_open = false;

  static TimeInterval closed(double lower, double upper) {
    return {lower, upper, false, false};
  }
  static TimeInterval unbounded() { return {}; }

  bool is_unbounded_above() const { return upper == kInfinity; }
  void validate() const;
  std::string to_string() const;
};

/// P=?[ phi1 U^I phi2 ]
struct UntilProperty {
  StateFormula phi1 = StateFormula::truth();
  StateFormula phi2 = StateFormula::truth();
  TimeInterval interval;

  static UntilProperty eventually(StateFormula target,
                                  TimeInterval interval = {}) {
    return {StateFormula::truth(), std::move(target), interval};
  }
  std::string to_string() const;
};

/// Linear combination of until probabilities.
struct PropertyExpr {
  struct Term {
    double coefficient = 1.0;
    UntilProperty property;
  };
  std::vector<Term> terms;

  static PropertyExpr single(UntilProperty property, double coefficient = 1.0) {
    return PropertyExpr{{Term{coefficient, std::move(property)}}};
  }
  void validate() const;
};

struct TraceStep {
  StateIndex state;
  double sojourn;
};

struct TimedTrace {
  std::vector<TraceStep> steps;
  StateIndex terminal = 0;
  bool censored = false;

  double duration() const;
};

double embedded_jump_probability(const Ctmc &model, StateIndex from,
                                 StateIndex to);

struct UntilProbabilities {
  std::vector<double> per_state;
  double value = 0.0;  // initial-distribution weighted
};

UntilProbabilities unbounded_until(const Ctmc &model, const StateFormula &phi1,
                                   const StateFormula &phi2);
UntilProbabilities unbounded_until(const Ctmc &model,
                                   const std::vector<bool> &phi1,
                                   const std::vector<bool> &phi2);

double transient_until(const Ctmc &model, const UntilProperty &property);

/// Transient distribution at time t from `start`, with the states flagged in
/// `absorbing` made absorbing.
std::vector<double> transient_distribution(const Ctmc &model,
                                           std::span<const double> start,
                                           double t,
                                           const std::vector<bool> &absorbing);

/// Incremental evaluation of P=?[phi1 U[0,t] phi2] for nondecreasing t.
class BoundedUntilStepper {
 public:
  BoundedUntilStepper(const Ctmc &model, const StateFormula &phi1,
                      const StateFormula &phi2);
  BoundedUntilStepper(const Ctmc &model, std::vector<double> start,
                      std::vector<bool> phi1, std::vector<bool> phi2);

  /// Probability mass in phi2 states at time t; t must not decrease.
  double advance_to(double t);

 private:
  const Ctmc *model_;
  std::vector<bool> absorbing_;
  std::vector<bool> goal_;
  std::vector<double> current_;
  double time_ = 0.0;
};

double erlang_cdf(long k, double rate, double x);

struct SimulationStop {
  double horizon = kInfinity;
  std::function<bool(StateIndex)> stop_at;  // optional early stop
  std::size_t max_steps = 10'000'000;
};

/// Precomputed jump tables for repeated path sampling on one model.
class TraceSimulator {
 public:
  explicit TraceSimulator(const Ctmc &model);

  template <typename Rng>
  TimedTrace run(Rng &rng, const SimulationStop &stop = {}) const;

  const Ctmc &model() const { return *model_; }

 private:
  StateIndex pick(std::span<const double> cumulative, double u) const;

  const Ctmc *model_;
  std::vector<double> initial_cdf_;
  std::vector<std::vector<double>> jump_cdf_;
};

TimedTrace simulate_trace(const Ctmc &model, std::uint64_t seed,
                          const SimulationStop &stop = {});

template <typename Rng>
TimedTrace TraceSimulator::run(Rng &rng, const SimulationStop &stop) const {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  TimedTrace trace;
  StateIndex state = pick(initial_cdf_, uniform(rng));
  double elapsed = 0.0;
  for (std::size_t step = 0;; ++step) {
    if (model_->is_absorbing(state) || (stop.stop_at && stop.stop_at(state))) {
      break;
    }
    if (step >= stop.max_steps) {
      trace.censored = true;
      break;
    }
    std::exponential_distribution<double> sojourn(model_->exit_rate(state));
    const double dwell = sojourn(rng);
    if (elapsed + dwell > stop.horizon) {
      trace.censored = true;
      break;
    }
    elapsed += dwell;
    trace.steps.push_back({state, dwell});
    const auto row = model_->transitions(state);
    state = row[pick(jump_cdf_[state], uniform(rng))].target;
  }
  trace.terminal = state;
  return trace;
}

namespace detail {

struct PoissonWeights {
  std::size_t left = 0;
  std::size_t right = 0;
  std::vector<double> weights;  // weights[i] is the term for left + i
  double total = 0.0;
};

inline constexpr double kPoissonTailBound = 1e-10;
inline constexpr std::size_t kMaxPoissonTerms = 1'000'000;

PoissonWeights poisson_weights(double mean,
                               double epsilon = kPoissonTailBound);

}  // namespace detail

}  // namespace omni

#endif  // OMNI_MARKOV_HPP
