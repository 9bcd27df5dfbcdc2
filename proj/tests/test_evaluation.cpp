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

#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "omni/error.hpp"
#include "omni/evaluation.hpp"

using namespace omni;
using omni::testing::web_app_model;

namespace {

TimedTrace trace_of(const Ctmc &m, std::vector<std::pair<std::string, double>> steps,
                    const std::string &terminal) {
  TimedTrace tr;
  for (const auto &[name, d] : steps) tr.steps.push_back({m.index_of(name), d});
  tr.terminal = m.index_of(terminal);
  return tr;
}

}  // namespace

TEST_CASE("sweep grid") {
  const auto g = sweep_grid(4.0, 0.05);
  CHECK(g.size() == 81);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 4.0);
  CHECK(sweep_grid(0.12, 0.05).back() == 0.12);
  CHECK(sweep_grid(0.12, 0.05).size() == 4);
  CHECK_THROWS_AS(sweep_grid(1.0, 0.0), Error);
}

TEST_CASE("high-level web application values") {
  const Ctmc web = web_app_model();
  const auto p1 = parse_property("P=? [ F[0,T] complete ]");
  const auto p2 = parse_property("P=? [ !arrivals U[0,T] complete ] / 0.7");
  CHECK(std::abs(evaluate_property(web, p1.at(1.0)) - 0.415) < 5e-4);
  CHECK(std::abs(evaluate_property(web, p2.at(2.0)) - 0.74) < 5e-3);

  const auto p3 = parse_property("P=?[F[0,T] complete] - 2*P=?[!complete U(3,inf) complete]");
  const auto grid = sweep_grid(4.0, 0.25);
  for (const auto *p : {&p1, &p2, &p3}) {
    const auto sweep = evaluate_property_sweep(web, *p, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(sweep.values[i] ==
            doctest::Approx(evaluate_property(web, p->at(grid[i]))).epsilon(1e-9));
  }
  const auto s1 = evaluate_property_sweep(web, p1, sweep_grid(4.0, 0.05));
  for (std::size_t i = 1; i < s1.values.size(); ++i) CHECK(s1.values[i] >= s1.values[i - 1]);
}

TEST_CASE("time shift") {
  const UntilProperty p{StateFormula::truth(), StateFormula::atom("x"),
                        TimeInterval::closed(0.5, 2.0)};
  auto s = shifted(p, 0.8);
  REQUIRE(s);
  CHECK(s->interval.lower == 0.0);
  CHECK(s->interval.upper == doctest::Approx(1.2));
  CHECK_FALSE(shifted(p, 2.5));
  CHECK(shifted(UntilProperty::eventually(StateFormula::atom("x")), 9.0)->interval.upper ==
        kInfinity);

  RefinedModel r;
  r.ctmc = web_app_model();
  r.time_shift = 0.3;
  const auto p1 = parse_property("P=? [ F[0,T] complete ]");
  const auto sweep = evaluate_property_sweep(r, p1, sweep_grid(1.0, 0.05));
  for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
    if (sweep.grid[i] < 0.3) CHECK(sweep.values[i] == 0.0);
    else
      CHECK(sweep.values[i] == doctest::Approx(evaluate_property(r.ctmc, p1.at(sweep.grid[i] - 0.3))));
  }
  CHECK(evaluate_property(r.ctmc, p1.at(0.2), 0.3) == 0.0);
  CHECK(sweep.refined);
}

TEST_CASE("empirical until on traces") {
  const Ctmc web = web_app_model();
  std::vector<TimedTrace> done;
  for (int i = 0; i < 5; ++i) done.push_back(trace_of(web, {{"location", 0.5}}, "complete"));
  CHECK(empirical_property_value(web, done, omni::testing::web_p1(1.0)) == 1.0);
  CHECK(empirical_property_value(web, done, omni::testing::web_p1(0.4)) == 0.0);

  const auto via_arrivals = trace_of(
      web, {{"location", 0.1}, {"arrivals", 0.1}, {"search", 0.1}, {"traffic", 0.1}}, "complete");
  CHECK(empirical_property_value(web, {via_arrivals}, omni::testing::web_p2(5.0)) == 0.0);
  CHECK(empirical_property_value(web, {via_arrivals}, omni::testing::web_p1(5.0)) == 1.0);

  // lower bounds, open ends and censoring
  const auto late = parse_property("P=? [ !complete U(3,inf) complete ]").at(0);
  const auto slow = trace_of(web, {{"location", 2.0}, {"departures", 2.0}, {"weather", 1.0},
                                   {"traffic", 0.5}}, "complete");
  CHECK(empirical_property_value(web, {slow}, late.terms[0].property) == 1.0);
  auto cut = slow;
  cut.steps.pop_back();
  cut.terminal = web.index_of("traffic");
  cut.censored = true;
  CHECK(empirical_property_value(web, {cut}, late.terms[0].property) == 0.0);
  const auto exactly3 = trace_of(web, {{"location", 3.0}}, "complete");
  CHECK(empirical_property_value(web, {exactly3}, late.terms[0].property) == 0.0);
  CHECK(empirical_property_value(web, {exactly3}, omni::testing::web_p1(3.0)) == 1.0);
}

TEST_CASE("empirical values converge to the solver") {
  const Ctmc web = web_app_model();
  TraceSimulator sim(web);
  std::mt19937_64 rng(2024);
  std::vector<TimedTrace> traces(100000);
  for (auto &t : traces) t = sim.run(rng);
  std::vector<UntilProperty> props{omni::testing::web_p1(1.0), omni::testing::web_p2(2.0),
                                   parse_property("P=? [ !complete U(3,inf) complete ]").at(0).terms[0].property,
                                   parse_property("P=? [ !weather U[0.5,2] traffic ]").at(0).terms[0].property};
  for (const auto &p : props) {
    const double exact = transient_until(web, p);
    const double emp = empirical_property_value(web, traces, p);
    const double se = std::sqrt(std::max(exact * (1 - exact), 1e-12) / traces.size());
    CHECK(std::abs(emp - exact) <= 3 * se);
  }
}

TEST_CASE("error area") {
  const auto g = sweep_grid(4.0, 0.05);
  std::vector<double> a(g.size()), b(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    a[i] = std::sin(g[i]);
    b[i] = a[i] + 0.1;
  }
  CHECK(error_area(g, a, a, 4.0).error == 0.0);
  CHECK(error_area(g, a, b, 4.0).error == doctest::Approx(0.4));
  CHECK(error_area(g, a, b, 2.0).error == doctest::Approx(0.2));
  CHECK(error_area(g, a, b, 1.99).error == doctest::Approx(0.199));
  std::vector<double> ramp(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) ramp[i] = a[i] + g[i];
  CHECK(error_area(g, a, ramp, 4.0).error == doctest::Approx(8.0));
  CHECK_THROWS_AS(error_area(g, a, std::vector<double>(3, 0.0), 4.0), Error);
  SweepResult x{"x", g, a, false}, y{"y", sweep_grid(4.0, 0.1), {}, false};
  y.values.assign(y.grid.size(), 0.0);
  CHECK_THROWS_WITH_AS(error_area(x, y), doctest::Contains("mismatched grids"), Error);
}

TEST_CASE("transition probability estimates") {
  const Ctmc web = web_app_model();
  std::vector<TimedTrace> traces;
  for (int i = 0; i < 705; ++i)
    traces.push_back(i < 533 ? trace_of(web, {{"location", 1}, {"arrivals", 1}}, "search")
                             : trace_of(web, {{"location", 1}, {"departures", 1}}, "weather"));
  traces.back().censored = true;
  const auto est = estimate_transition_probabilities(web, traces);
  const StateIndex loc = web.index_of("location");
  CHECK(est.departures[loc] == 705);
  CHECK(est.probability[loc].at(web.index_of("arrivals")) == doctest::Approx(533.0 / 705));
  CHECK(std::round(est.probability[loc].at(web.index_of("arrivals")) * 100) / 100 == 0.76);
  CHECK(est.probability[web.index_of("arrivals")].at(web.index_of("search")) == 1.0);
  CHECK(est.undefined[web.index_of("traffic")]);
  CHECK_FALSE(est.undefined[loc]);
}

TEST_CASE("bootstrap traces") {
  const Ctmc chain({"s1", "done"}, {1, 0}, {{{1, 1.0}}, {}}, {});
  ObservationMap obs{{"s1", {"s1", {1.0, 2.0}, TimeUnit::Seconds}}};
  const auto traces = bootstrap_traces(chain, obs, 200, 5);
  bool saw1 = false, saw2 = false;
  for (const auto &t : traces) {
    CHECK((t.duration() == 1.0 || t.duration() == 2.0));
    saw1 |= t.duration() == 1.0;
    saw2 |= t.duration() == 2.0;
    CHECK(t.terminal == 1);
  }
  CHECK((saw1 && saw2));

  const Ctmc web = web_app_model();
  std::mt19937_64 rng(8);
  ObservationMap web_obs;
  for (const auto &name : omni::testing::kWebAppStates) {
    if (name == "complete") continue;
    ObservationSet o{name, {}, TimeUnit::Seconds};
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int i = 0; i < 50; ++i) o.durations.push_back(u(rng));
    web_obs[name] = o;
  }
  const auto a = bootstrap_traces(web, web_obs, 50, 3), b = bootstrap_traces(web, web_obs, 50, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].steps.size() == b[i].steps.size());
    CHECK(a[i].duration() == b[i].duration());
  }

  // expected visits on the jump chain times per-component sample means
  std::vector<std::vector<Transition>> rows = web.rows();
  for (StateIndex s = 0; s < web.size(); ++s) {
    const double exit = web.exit_rate(s);
    for (auto &t : rows[s]) t.rate /= exit;  // jump chain with unit exit rates
  }
  double expected = 0.0;
  {
    // with unit rates the expected absorption time equals the expected number of visits
    std::vector<std::vector<Transition>> one(web.size());
    for (StateIndex s = 0; s < web.size(); ++s) {
      const double mean = web.is_absorbing(s) ? 0.0 : [&] {
        const auto &d = web_obs.at(web.name(s)).durations;
        double m = 0.0;
        for (double x : d) m += x;
        return m / d.size();
      }();
      for (const auto &t : rows[s]) one[s].push_back({t.target, t.rate / mean});
    }
    expected = omni::testing::expected_absorption_time(
        Ctmc(web.names(), web.initial(), one, {}));
  }
  const auto many = bootstrap_traces(web, web_obs, 100000, 17);
  double sum = 0.0, sq = 0.0;
  for (const auto &t : many) {
    sum += t.duration();
    sq += t.duration() * t.duration();
  }
  const double mean = sum / many.size();
  const double se = std::sqrt((sq / many.size() - mean * mean) / many.size());
  CHECK(std::abs(mean - expected) <= 3 * se);

  web_obs.erase("weather");
  CHECK_THROWS_WITH_AS(bootstrap_traces(web, web_obs, 1, 1), doctest::Contains("weather"), Error);
}

TEST_CASE("results csv") {
  SweepResult r{"P1", {0, 0.05, 0.1}, {0, 0.123456789012, 0.5}, false};
  const auto back = parse_results_csv(format_results_csv(r));
  CHECK(back.grid == r.grid);
  CHECK(back.values[1] == doctest::Approx(0.123456789012).epsilon(1e-12));
  CHECK(format_results_csv(r).rfind("T,value\n", 0) == 0);
  CHECK_THROWS_AS(parse_results_csv("T,value\n"), Error);
  CHECK_THROWS_AS(parse_results_csv("T,value\n1,x\n"), Error);
}
