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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "omni/error.hpp"
#include "omni/markov.hpp"

namespace omni {

namespace detail {

PoissonWeights poisson_weights(double mean, double epsilon) {
  if (!std::isfinite(mean) || mean < 0.0) {
    fail_solver("invalid Poisson mean in uniformization");
  }
  PoissonWeights out;
  if (mean == 0.0) {
    out.weights = {1.0};
    out.total = 1.0;
    return out;
  }

  const double mode = std::floor(mean);
  const double log_mode_weight =
      -mean + mode * std::log(mean) - std::lgamma(mode + 1.0);
  const double mode_weight = std::exp(log_mode_weight);
  // Each tail gets a quarter of the budget; the rest absorbs rounding in the
  // mode weight for large means.
  const double tail_eps = 0.25 * epsilon;

  // Right tail: successive ratios mean/(k+1) decrease, so the remaining mass
  // after k is bounded by a geometric series.
  std::vector<double> right{mode_weight};
  {
    double k = mode;
    double w = mode_weight;
    for (;;) {
      const double ratio = mean / (k + 1.0);
      if (ratio < 1.0 && w * ratio / (1.0 - ratio) <= tail_eps) break;
      w *= ratio;
      k += 1.0;
      right.push_back(w);
      if (right.size() > kMaxPoissonTerms) {
        std::ostringstream msg;
        msg << "uniformization needs more than " << kMaxPoissonTerms
            << " Poisson terms (mean " << mean << ")";
        fail_solver(msg.str());
      }
    }
  }

  std::vector<double> left;
  {
    double k = mode;
    double w = mode_weight;
    while (k > 0.0) {
      const double ratio = k / mean;
      if (ratio < 1.0 && w * ratio / (1.0 - ratio) <= tail_eps) break;
      w *= ratio;
      k -= 1.0;
      left.push_back(w);
      if (left.size() + right.size() > kMaxPoissonTerms) {
        std::ostringstream msg;
        msg << "uniformization needs more than " << kMaxPoissonTerms
            << " Poisson terms (mean " << mean << ")";
        fail_solver(msg.str());
      }
    }
  }

  out.left = static_cast<std::size_t>(mode) - left.size();
  out.right = static_cast<std::size_t>(mode) + right.size() - 1;
  out.weights.reserve(left.size() + right.size());
  out.weights.assign(left.rbegin(), left.rend());
  out.weights.insert(out.weights.end(), right.begin(), right.end());
  out.total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  return out;
}

}  // namespace detail

namespace {

double uniformization_rate(const Ctmc &model,
                           const std::vector<bool> &absorbing) {
  double max_exit = 0.0;
  for (StateIndex s = 0; s < model.size(); ++s) {
    if (!absorbing[s]) max_exit = std::max(max_exit, model.exit_rate(s));
  }
  return 1.02 * max_exit;
}

// out = in * P, with P = I + Q/q restricted by `absorbing`.
void uniformized_product(const Ctmc &model, const std::vector<bool> &absorbing,
                         double q, const std::vector<double> &in,
                         std::vector<double> &out) {
  const std::size_t n = model.size();
  for (StateIndex s = 0; s < n; ++s) {
    out[s] = absorbing[s] ? in[s] : in[s] * (1.0 - model.exit_rate(s) / q);
  }
  for (StateIndex s = 0; s < n; ++s) {
    if (absorbing[s] || in[s] == 0.0) continue;
    const double scaled = in[s] / q;
    for (const Transition &t : model.transitions(s)) {
      out[t.target] += scaled * t.rate;
    }
  }
}

std::vector<double> masked(std::vector<double> values,
                           const std::vector<bool> &keep) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!keep[i]) values[i] = 0.0;
  }
  return values;
}

double mass_on(const std::vector<double> &values,
               const std::vector<bool> &where) {
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (where[i]) total += values[i];
  }
  return total;
}

std::vector<bool> until_absorbing(const std::vector<bool> &phi1,
                                  const std::vector<bool> &phi2) {
  std::vector<bool> out(phi1.size());
  for (std::size_t i = 0; i < phi1.size(); ++i) out[i] = phi2[i] || !phi1[i];
  return out;
}

}  // namespace

std::vector<double> transient_distribution(const Ctmc &model,
                                           std::span<const double> start,
                                           double t,
                                           const std::vector<bool> &absorbing) {
  if (start.size() != model.size() || absorbing.size() != model.size()) {
    fail_validation("transient distribution dimension mismatch");
  }
  if (!std::isfinite(t) || t < 0.0) fail_validation("invalid time horizon");
  std::vector<double> current(start.begin(), start.end());
  const double q = uniformization_rate(model, absorbing);
  if (t == 0.0 || q == 0.0) return current;

  const detail::PoissonWeights poisson = detail::poisson_weights(q * t);
  std::vector<double> result(model.size(), 0.0);
  std::vector<double> next(model.size());
  for (std::size_t k = 0; k <= poisson.right; ++k) {
    if (k >= poisson.left) {
      const double w = poisson.weights[k - poisson.left];
      for (std::size_t i = 0; i < current.size(); ++i) {
        result[i] += w * current[i];
      }
    }
    if (k == poisson.right) break;
    uniformized_product(model, absorbing, q, current, next);
    current.swap(next);
  }
  for (double &v : result) v /= poisson.total;
  return result;
}

double embedded_jump_probability(const Ctmc &model, StateIndex from,
                                 StateIndex to) {
  if (from >= model.size() || to >= model.size()) {
    fail_validation("state index out of range");
  }
  if (from == to) fail_validation("jump probability needs distinct states");
  if (model.is_absorbing(from)) {
    fail_validation("state '" + model.name(from) + "' has no outgoing transitions");
  }
  return model.rate(from, to) / model.exit_rate(from);
}

UntilProbabilities unbounded_until(const Ctmc &model,
                                   const std::vector<bool> &phi1,
                                   const std::vector<bool> &phi2) {
  const std::size_t n = model.size();
  if (phi1.size() != n || phi2.size() != n) {
    fail_validation("formula mask dimension mismatch");
  }

  std::vector<std::vector<StateIndex>> predecessors(n);
  for (StateIndex s = 0; s < n; ++s) {
    for (const Transition &t : model.transitions(s)) {
      predecessors[t.target].push_back(s);
    }
  }

  // States that can reach phi2 through phi1-states with positive probability.
  std::vector<bool> reaches(n, false);
  std::vector<StateIndex> frontier;
  for (StateIndex s = 0; s < n; ++s) {
    if (phi2[s]) {
      reaches[s] = true;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const StateIndex s = frontier.back();
    frontier.pop_back();
    for (StateIndex p : predecessors[s]) {
      if (!reaches[p] && phi1[p] && !phi2[p]) {
        reaches[p] = true;
        frontier.push_back(p);
      }
    }
  }

  std::vector<double> x(n, 0.0);
  std::vector<bool> unknown(n, false);
  for (StateIndex s = 0; s < n; ++s) {
    if (phi2[s]) x[s] = 1.0;
    unknown[s] = reaches[s] && !phi2[s];
  }

  // Successor-first ordering lets Gauss-Seidel finish acyclic parts in a
  // single sweep.
  std::vector<StateIndex> order;
  {
    std::vector<char> seen(n, 0);
    std::vector<std::pair<StateIndex, std::size_t>> stack;
    for (StateIndex root = 0; root < n; ++root) {
      if (!unknown[root] || seen[root]) continue;
      seen[root] = 1;
      stack.push_back({root, 0});
      while (!stack.empty()) {
        auto &[s, next] = stack.back();
        const auto row = model.transitions(s);
        if (next < row.size()) {
          const StateIndex t = row[next++].target;
          if (unknown[t] && !seen[t]) {
            seen[t] = 1;
            stack.push_back({t, 0});
          }
        } else {
          order.push_back(s);
          stack.pop_back();
        }
      }
    }
  }

  constexpr std::size_t kMaxSweeps = 200'000;
  constexpr double kTolerance = 1e-15;
  bool converged = order.empty();
  for (std::size_t sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double change = 0.0;
    for (StateIndex s : order) {
      double value = 0.0;
      for (const Transition &t : model.transitions(s)) {
        value += t.rate * x[t.target];
      }
      value /= model.exit_rate(s);
      change = std::max(change, std::abs(value - x[s]));
      x[s] = value;
    }
    converged = change <= kTolerance;
  }
  if (!converged) {
    fail_solver("unbounded until iteration did not converge");
  }

  UntilProbabilities out;
  out.value = 0.0;
  for (StateIndex s = 0; s < n; ++s) {
    out.value += model.initial(s) * x[s];
  }
  out.per_state = std::move(x);
  return out;
}

UntilProbabilities unbounded_until(const Ctmc &model, const StateFormula &phi1,
                                   const StateFormula &phi2) {
  return unbounded_until(model, phi1.mask(model), phi2.mask(model));
}

double transient_until(const Ctmc &model, const UntilProperty &property) {
  const TimeInterval &interval = property.interval;
  interval.validate();
  const std::vector<bool> phi1 = property.phi1.mask(model);
  const std::vector<bool> phi2 = property.phi2.mask(model);

  std::vector<double> start = model.initial();
  if (interval.lower > 0.0) {
    // Phi1 must hold throughout [0, lower): evolve with violating states
    // absorbing and keep only the mass still inside phi1-states.
    std::vector<bool> violating(phi1.size());
    for (std::size_t i = 0; i < phi1.size(); ++i) violating[i] = !phi1[i];
    start = masked(transient_distribution(model, start, interval.lower,
                                          violating),
                   phi1);
  }

  double value = 0.0;
  if (interval.is_unbounded_above()) {
    const UntilProbabilities reach = unbounded_until(model, phi1, phi2);
    for (StateIndex s = 0; s < model.size(); ++s) {
      value += start[s] * reach.per_state[s];
    }
  } else {
    const double span = interval.upper - interval.lower;
    const std::vector<double> at_end = transient_distribution(
        model, start, span, until_absorbing(phi1, phi2));
    value = mass_on(at_end, phi2);
  }
  return std::clamp(value, 0.0, 1.0);
}

BoundedUntilStepper::BoundedUntilStepper(const Ctmc &model,
                                         const StateFormula &phi1,
                                         const StateFormula &phi2)
    : BoundedUntilStepper(model, model.initial(), phi1.mask(model),
                          phi2.mask(model)) {}

BoundedUntilStepper::BoundedUntilStepper(const Ctmc &model,
                                         std::vector<double> start,
                                         std::vector<bool> phi1,
                                         std::vector<bool> phi2)
    : model_(&model),
      absorbing_(until_absorbing(phi1, phi2)),
      goal_(std::move(phi2)),
      current_(std::move(start)) {}

double BoundedUntilStepper::advance_to(double t) {
  if (t < time_) fail_validation("bounded until stepper cannot go back in time");
  if (t > time_) {
    current_ = transient_distribution(*model_, current_, t - time_, absorbing_);
    time_ = t;
  }
  return std::clamp(mass_on(current_, goal_), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

double erlang_cdf(long k, double rate, double x) {
  if (k < 1) fail_validation("Erlang phase count must be positive");
  if (!std::isfinite(rate) || rate <= 0.0) {
    fail_validation("Erlang rate must be positive");
  }
  if (std::isnan(x) || x < 0.0) fail_validation("Erlang argument must be >= 0");
  if (x == 0.0) return 0.0;
  if (x == kInfinity) return 1.0;

  const double mean = rate * x;
  const double log_mean = std::log(mean);
  auto log_term = [&](double i) {
    return -mean + i * log_mean - std::lgamma(i + 1.0);
  };

  if (static_cast<double>(k) - 1.0 < mean) {
    // Lower Poisson tail (terms increase towards i = k-1) is the small side.
    const double top = log_term(static_cast<double>(k - 1));
    double sum = 0.0;
    for (long i = k - 1; i >= 0; --i) {
      const double rel = log_term(static_cast<double>(i)) - top;
      sum += std::exp(rel);
      if (rel < -40.0) break;
    }
    return std::clamp(1.0 - std::exp(top + std::log(sum)), 0.0, 1.0);
  }

  // Upper tail P(N >= k): terms decrease from i = k onwards.
  const double top = log_term(static_cast<double>(k));
  double sum = 0.0;
  for (long i = k;; ++i) {
    const double rel = log_term(static_cast<double>(i)) - top;
    sum += std::exp(rel);
    if (rel < -40.0) break;
  }
  return std::clamp(std::exp(top + std::log(sum)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

TraceSimulator::TraceSimulator(const Ctmc &model) : model_(&model) {
  double acc = 0.0;
  for (double p : model.initial()) {
    acc += p;
    initial_cdf_.push_back(acc);
  }
  jump_cdf_.resize(model.size());
  for (StateIndex s = 0; s < model.size(); ++s) {
    double running = 0.0;
    for (const Transition &t : model.transitions(s)) {
      running += t.rate / model.exit_rate(s);
      jump_cdf_[s].push_back(running);
    }
  }
}

StateIndex TraceSimulator::pick(std::span<const double> cumulative,
                                double u) const {
  const double scaled = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), scaled);
  if (it == cumulative.end()) --it;
  return static_cast<StateIndex>(it - cumulative.begin());
}

TimedTrace simulate_trace(const Ctmc &model, std::uint64_t seed,
                          const SimulationStop &stop) {
  std::mt19937_64 rng(seed);
  return TraceSimulator(model).run(rng, stop);
}

}  // namespace omni
