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

#ifndef OMNI_TESTS_FIXTURES_HPP
#define OMNI_TESTS_FIXTURES_HPP

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "omni/markov.hpp"

namespace omni::testing {

// Component rates of the travel web application (1/s).
struct WebAppRates {
  double location = 9.62;
  double arrivals = 19.88;
  double departures = 19.46;
  double search = 1.85;
  double weather = 1.11;
  double traffic = 2.51;
};

// s1..s7 of the travel web application, named after their components.
inline const std::vector<std::string> kWebAppStates = {
    "location", "arrivals", "departures", "search",
    "weather",  "traffic",  "complete"};

inline Ctmc web_app_model(double p1 = 0.3, double p2 = 0.1,
                          const WebAppRates &r = {}) {
  std::vector<std::vector<Transition>> rows(7);
  rows[0] = {{1, p1 * r.location}, {2, (1 - p1) * r.location}};
  rows[1] = {{3, r.arrivals}};
  rows[2] = {{4, r.departures}};
  rows[3] = {{5, r.search}};
  rows[4] = {{2, p2 * r.weather}, {5, (1 - p2) * r.weather}};
  rows[5] = {{6, r.traffic}};
  return Ctmc(kWebAppStates, {1, 0, 0, 0, 0, 0, 0}, rows, {});
}

inline UntilProperty web_p1(double t) {
  return UntilProperty::eventually(StateFormula::atom("complete"),
                                   TimeInterval::closed(0, t));
}

inline UntilProperty web_p2(double t) {
  return {StateFormula::negation(StateFormula::atom("arrivals")),
          StateFormula::atom("complete"), TimeInterval::closed(0, t)};
}

// P3 = P=?[F[0,T] complete] - 2 * P=?[!complete U(3,inf) complete]
inline PropertyExpr web_p3(double t) {
  PropertyExpr expr = PropertyExpr::single(web_p1(t));
  TimeInterval late{3.0, kInfinity, true, true};
  expr.terms.push_back(
      {-2.0,
       {StateFormula::negation(StateFormula::atom("complete")),
        StateFormula::atom("complete"), late}});
  return expr;
}

// k exponential phases at `rate` followed by an absorbing "done" state.
inline Ctmc erlang_chain(long k, double rate) {
  std::vector<std::string> names;
  std::vector<std::vector<Transition>> rows(k + 1);
  std::vector<double> init(k + 1, 0.0);
  init[0] = 1.0;
  for (long i = 0; i < k; ++i) {
    names.push_back("z" + std::to_string(i));
    rows[i] = {{static_cast<StateIndex>(i + 1), rate}};
  }
  names.push_back("done");
  return Ctmc(names, init, rows, {});
}

// Random acyclic model: states 0..n-3 transient (edges only forward),
// n-2 = "goal", n-1 = "fail", both absorbing.
inline Ctmc random_acyclic_model(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rate(0.2, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> names;
  std::vector<std::vector<Transition>> rows(n);
  std::vector<std::set<std::string>> labels(n);
  for (std::size_t i = 0; i + 2 < n; ++i) {
    names.push_back("t" + std::to_string(i));
    // Always one edge forward, plus up to two more random forward edges.
    std::uniform_int_distribution<std::size_t> pick(i + 1, n - 1);
    rows[i].push_back({std::min(i + 1, n - 2), rate(rng)});
    for (int extra = 0; extra < 2; ++extra) {
      if (unit(rng) < 0.6) rows[i].push_back({pick(rng), rate(rng)});
    }
    if (unit(rng) < 0.3) labels[i].insert("busy");
  }
  names.push_back("goal");
  names.push_back("fail");
  labels[n - 2].insert("goal");
  std::vector<double> init(n, 0.0);
  init[0] = 0.7;
  init[1] = 0.3;
  return Ctmc(names, init, rows, labels);
}

// Expected time to absorption via dense expected-visit counts on the jump
// chain: visits = pi_T (I - P_TT)^{-1}, time = sum visits(s) / exit(s).
inline double expected_absorption_time(const Ctmc &model) {
  const std::size_t n = model.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  // Solve (I - P^T) v = pi for visit counts v.
  for (std::size_t i = 0; i < n; ++i) {
    a[i][i] = 1.0;
    a[i][n] = model.initial(i);
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (const Transition &t : model.transitions(s)) {
      a[t.target][s] -= t.rate / model.exit_rate(s);
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c] == 0.0) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    if (!model.is_absorbing(s)) total += (a[s][n] / a[s][s]) / model.exit_rate(s);
  }
  return total;
}

}  // namespace omni::testing

#endif  // OMNI_TESTS_FIXTURES_HPP
