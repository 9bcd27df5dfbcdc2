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

#include "omni/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <random>
#include <sstream>

#include "omni/error.hpp"

namespace omni {

std::vector<double> sweep_grid(double tmax, double step) {
  if (!(tmax >= 0.0) || !std::isfinite(tmax)) fail_validation("tmax must be finite and >= 0");
  if (!(step > 0.0) || !std::isfinite(step)) fail_validation("step must be positive");
  std::vector<double> grid;
  for (long i = 0;; ++i) {
    const double t = static_cast<double>(i) * step;
    if (t >= tmax - 1e-9 * step) break;
    grid.push_back(t);
  }
  grid.push_back(tmax);
  return grid;
}

std::optional<UntilProperty> shifted(const UntilProperty &prop, double shift) {
  if (!(shift >= 0.0)) fail_validation("time shift must be >= 0");
  UntilProperty out = prop;
  TimeInterval &iv = out.interval;
  if (iv.upper < iv.lower) return std::nullopt;  // empty interval
  if (shift == 0.0) return out;
  if (iv.upper - shift < 0.0) return std::nullopt;
  if (iv.upper != kInfinity) iv.upper -= shift;
  iv.lower -= shift;
  if (iv.lower < 0.0) {
    iv.lower = 0.0;
    iv.lower_open = false;
  }
  return out;
}

namespace {

std::string at_time(double t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, " (at T=%.9g)", t);
  return buf;
}

double term_value(const Ctmc &model, const UntilProperty &prop, double shift) {
  const auto p = shifted(prop, shift);
  return p ? transient_until(model, *p) : 0.0;
}

}  // namespace

double evaluate_property(const Ctmc &model, const PropertyExpr &expr, double time_shift) {
  expr.validate();
  double v = 0.0;
  for (const auto &term : expr.terms)
    v += term.coefficient * term_value(model, term.property, time_shift);
  return v;
}

SweepResult evaluate_property_sweep(const Ctmc &model, const PropertyTemplate &prop,
                                    const std::vector<double> &grid, double time_shift) {
  if (grid.empty()) fail_validation("empty sweep grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) fail_validation("sweep grid must be strictly increasing");
  if (grid.front() < 0.0) fail_validation("sweep grid must be >= 0");
  SweepResult out;
  out.id = prop.name;
  out.grid = grid;
  out.values.assign(grid.size(), 0.0);
  for (const auto &term : prop.terms) {
    const UntilTemplate &u = term.until;
    std::vector<double> vals(grid.size(), 0.0);
    double current_t = grid.front();
    try {
      if (!u.uses_parameter()) {
        const double v = term_value(model, u.at(0.0), time_shift);
        std::fill(vals.begin(), vals.end(), v);
      } else if (!u.lower.parameter && u.lower.value == 0.0 && !u.lower_open) {
        // [0,T]: one incremental pass over the grid
        BoundedUntilStepper stepper(model, u.phi1, u.phi2);
        for (std::size_t i = 0; i < grid.size(); ++i) {
          current_t = grid[i];
          const double span = u.upper.at(grid[i]) - time_shift;
          vals[i] = span < 0.0 ? 0.0 : stepper.advance_to(span);
        }
      } else {
        for (std::size_t i = 0; i < grid.size(); ++i) {
          current_t = grid[i];
          vals[i] = term_value(model, u.at(grid[i]), time_shift);
        }
      }
    } catch (const Error &e) {
      throw Error(e.kind(), e.what() + at_time(current_t));
    }
    for (std::size_t i = 0; i < grid.size(); ++i) out.values[i] += term.coefficient * vals[i];
  }
  return out;
}

SweepResult evaluate_property_sweep(const RefinedModel &model, const PropertyTemplate &prop,
                                    const std::vector<double> &grid) {
  SweepResult out = evaluate_property_sweep(model.ctmc, prop, grid, model.time_shift);
  out.refined = true;
  return out;
}

namespace {

bool in_interval(const TimeInterval &iv, double t) {
  const bool above = iv.lower < t || (iv.lower == t && !iv.lower_open);
  const bool below = t < iv.upper || (t == iv.upper && !iv.upper_open);
  return above && below;
}

// does [c, e) meet the interval?
bool overlaps(const TimeInterval &iv, double c, double e) {
  double lo = c;
  bool lo_in = true;
  if (iv.lower >= c) {
    lo = iv.lower;
    lo_in = !iv.lower_open;
  }
  double hi = e;
  bool hi_in = false;
  if (iv.upper < e) {
    hi = iv.upper;
    hi_in = !iv.upper_open;
  }
  return lo < hi || (lo == hi && lo_in && hi_in);
}

bool trace_satisfies(const TimedTrace &tr, const std::vector<bool> &phi1,
                     const std::vector<bool> &phi2, const TimeInterval &iv) {
  double c = 0.0;
  for (const auto &step : tr.steps) {
    const double e = c + step.sojourn;
    if (phi2[step.state]) {
      if (in_interval(iv, c)) return true;
      if (phi1[step.state] && overlaps(iv, c, e)) return true;
    }
    if (!phi1[step.state]) return false;
    c = e;
  }
  const StateIndex s = tr.terminal;
  if (!phi2[s]) return false;
  if (in_interval(iv, c)) return true;
  // a censored run says nothing about the time after it stopped
  return !tr.censored && phi1[s] && overlaps(iv, c, kInfinity);
}

}  // namespace

double empirical_property_value(const Ctmc &model, const std::vector<TimedTrace> &traces,
                                const UntilProperty &prop) {
  if (traces.empty()) fail_validation("no traces");
  prop.interval.validate();
  const auto phi1 = prop.phi1.mask(model), phi2 = prop.phi2.mask(model);
  std::size_t hits = 0;
  for (const auto &tr : traces)
    if (trace_satisfies(tr, phi1, phi2, prop.interval)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(traces.size());
}

double empirical_property_value(const Ctmc &model, const std::vector<TimedTrace> &traces,
                                const PropertyExpr &expr) {
  expr.validate();
  double v = 0.0;
  for (const auto &term : expr.terms)
    v += term.coefficient * empirical_property_value(model, traces, term.property);
  return v;
}

SweepResult empirical_sweep(const Ctmc &model, const std::vector<TimedTrace> &traces,
                            const PropertyTemplate &prop, const std::vector<double> &grid) {
  SweepResult out;
  out.id = prop.name;
  out.grid = grid;
  for (double t : grid) {
    double v = 0.0;
    for (const auto &term : prop.terms) {
      const UntilProperty p = term.until.at(t);
      if (p.interval.upper < p.interval.lower) continue;
      v += term.coefficient * empirical_property_value(model, traces, p);
    }
    out.values.push_back(v);
  }
  return out;
}

ErrorReport error_area(const std::vector<double> &grid, const std::vector<double> &actual,
                       const std::vector<double> &predicted, double t_max) {
  if (grid.empty()) fail_validation("empty grid");
  if (actual.size() != grid.size() || predicted.size() != grid.size())
    fail_validation("mismatched grids: curve lengths differ");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) fail_validation("grid must be strictly increasing");
  if (t_max < grid.front() || t_max > grid.back() + 1e-12)
    fail_validation("t_max outside the grid");
  ErrorReport r;
  r.t_max = t_max;
  for (std::size_t i = 0; i < grid.size(); ++i)
    r.differences.push_back(std::abs(actual[i] - predicted[i]));
  for (std::size_t i = 1; i < grid.size() && grid[i - 1] < t_max; ++i) {
    const double d0 = r.differences[i - 1], d1 = r.differences[i];
    double right = grid[i], dr = d1;
    if (grid[i] > t_max) {
      const double f = (t_max - grid[i - 1]) / (grid[i] - grid[i - 1]);
      right = t_max;
      dr = d0 + f * (d1 - d0);
    }
    r.error += 0.5 * (d0 + dr) * (right - grid[i - 1]);
  }
  return r;
}

ErrorReport error_area(const SweepResult &actual, const SweepResult &predicted) {
  if (actual.grid.size() != predicted.grid.size())
    fail_validation("mismatched grids");
  for (std::size_t i = 0; i < actual.grid.size(); ++i)
    if (std::abs(actual.grid[i] - predicted.grid[i]) > 1e-9 * std::max(1.0, actual.grid[i]))
      fail_validation("mismatched grids");
  if (actual.grid.empty()) fail_validation("empty grid");
  return error_area(actual.grid, actual.values, predicted.values, actual.grid.back());
}

TransitionEstimate estimate_transition_probabilities(const Ctmc &model,
                                                     const std::vector<TimedTrace> &traces) {
  if (traces.empty()) fail_validation("no traces");
  const std::size_t n = model.size();
  std::vector<std::map<StateIndex, std::size_t>> counts(n);
  TransitionEstimate out;
  out.departures.assign(n, 0);
  for (const auto &tr : traces) {
    for (std::size_t i = 0; i < tr.steps.size(); ++i) {
      const StateIndex from = tr.steps[i].state;
      const StateIndex to = i + 1 < tr.steps.size() ? tr.steps[i + 1].state : tr.terminal;
      ++counts[from][to];
      ++out.departures[from];
    }
  }
  out.probability.resize(n);
  out.undefined.assign(n, false);
  for (StateIndex s = 0; s < n; ++s) {
    if (out.departures[s] == 0) {
      out.undefined[s] = true;
      continue;
    }
    for (const auto &[to, c] : counts[s])
      out.probability[s][to] = static_cast<double>(c) / static_cast<double>(out.departures[s]);
  }
  return out;
}

std::vector<TimedTrace> bootstrap_traces(const Ctmc &skeleton,
                                         const ObservationMap &observations,
                                         std::size_t n, std::uint64_t seed) {
  const std::size_t size = skeleton.size();
  // every transient state reachable from the initial support needs data
  std::vector<bool> seen(size, false);
  std::deque<StateIndex> queue;
  for (StateIndex s = 0; s < size; ++s)
    if (skeleton.initial(s) > 0.0) {
      seen[s] = true;
      queue.push_back(s);
    }
  std::vector<const std::vector<double> *> samples(size, nullptr);
  while (!queue.empty()) {
    const StateIndex s = queue.front();
    queue.pop_front();
    if (skeleton.is_absorbing(s)) continue;
    auto it = observations.find(skeleton.name(s));
    if (it == observations.end() || it->second.durations.empty())
      fail_validation("missing observations for component '" + skeleton.name(s) + "'");
    samples[s] = &it->second.durations;
    for (const auto &t : skeleton.transitions(s))
      if (!seen[t.target]) {
        seen[t.target] = true;
        queue.push_back(t.target);
      }
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<StateIndex> start(skeleton.initial().begin(),
                                               skeleton.initial().end());
  std::vector<std::discrete_distribution<std::size_t>> jump(size);
  for (StateIndex s = 0; s < size; ++s) {
    std::vector<double> w;
    for (const auto &t : skeleton.transitions(s)) w.push_back(t.rate);
    if (!w.empty()) jump[s] = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
  constexpr std::size_t kMaxSteps = 1'000'000;
  std::vector<TimedTrace> out(n);
  for (auto &tr : out) {
    StateIndex s = start(rng);
    while (!skeleton.is_absorbing(s)) {
      if (tr.steps.size() >= kMaxSteps) {
        tr.censored = true;
        break;
      }
      const auto &obs = *samples[s];
      std::uniform_int_distribution<std::size_t> pick(0, obs.size() - 1);
      tr.steps.push_back({s, obs[pick(rng)]});
      s = skeleton.transitions(s)[jump[s](rng)].target;
    }
    tr.terminal = s;
  }
  return out;
}

std::string format_results_csv(const SweepResult &result) {
  std::ostringstream out;
  out << "T,value\n";
  char buf[80];
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", result.grid[i], result.values[i]);
    out << buf;
  }
  return out.str();
}

SweepResult parse_results_csv(const std::string &text) {
  SweepResult out;
  std::istringstream in(text);
  std::string row;
  int line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string::npos)
      fail_validation("results line " + std::to_string(line) + ": expected T,value");
    try {
      std::size_t used = 0;
      const double t = std::stod(row.substr(0, comma), &used);
      const double v = std::stod(row.substr(comma + 1));
      out.grid.push_back(t);
      out.values.push_back(v);
    } catch (const std::exception &) {
      if (line == 1) continue;  // header
      fail_validation("results line " + std::to_string(line) + ": not numeric");
    }
  }
  if (out.grid.empty()) fail_validation("results file has no rows");
  return out;
}

}  // namespace omni
