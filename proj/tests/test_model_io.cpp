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

#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "omni/error.hpp"
#include "omni/model_io.hpp"
#include "omni/refinement.hpp"

using namespace omni;

namespace {

// Random model with cycles, labels and a spread initial distribution.
Ctmc random_model(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), rate(0.01, 50.0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i)
    names.push_back(i % 5 == 3 ? "s" + std::to_string(i) + "#h1." + std::to_string(i)
                               : "s" + std::to_string(i));
  std::vector<std::vector<Transition>> rows(n);
  std::vector<std::set<std::string>> labels(n);
  std::vector<double> init(n, 0.0);
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (u(rng) < 0.8) {
      const int edges = 1 + static_cast<int>(u(rng) * 3);
      for (int e = 0; e < edges; ++e) {
        const std::size_t t = pick(rng);
        if (t != i) rows[i].push_back({t, rate(rng)});
      }
    }
    if (u(rng) < 0.3) labels[i].insert("red");
    if (u(rng) < 0.2) labels[i].insert("blue");
    if (u(rng) < 0.3) {
      init[i] = u(rng);
      mass += init[i];
    }
  }
  if (mass == 0.0) {
    init[0] = 1.0;
  } else {
    for (auto &p : init) p /= mass;
    double s = 0.0;
    for (std::size_t i = 1; i < n; ++i) s += init[i];
    init[0] = 1.0 - s;
    if (init[0] < 0.0) init[0] = 0.0;
  }
  return Ctmc(names, init, rows, labels);
}

void check_isomorphic(const Ctmc &a, const Ctmc &b) {
  REQUIRE(a.size() == b.size());
  for (StateIndex s = 0; s < a.size(); ++s) {
    const StateIndex t = b.index_of(a.name(s));
    CHECK(std::abs(a.initial(s) - b.initial(t)) < 1e-15);
    CHECK(a.labels(s) == b.labels(t));
    REQUIRE(a.transitions(s).size() == b.transitions(t).size());
    for (const auto &tr : a.transitions(s))
      CHECK(b.rate(t, b.index_of(a.name(tr.target))) ==
            doctest::Approx(tr.rate).epsilon(1e-12));
  }
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("omni_io_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("parse small models") {
  auto sk = parse_model("s=<a> -> 1.0:(s'=<done>);\n<done>;\n");
  CHECK(sk.states == std::vector<std::string>{"a", "done"});
  CHECK(sk.deferred() == std::vector<std::string>{"a"});
  CHECK_THROWS_AS(sk.build(), Error);
  const Ctmc bound = sk.bind({{"a", 2.0}});
  CHECK(bound.rate(0, 1) == 2.0);
  CHECK(bound.initial(0) == 1.0);
  CHECK(bound.is_absorbing(1));

  const std::string web =
      "// travel app fragment\n"
      "ctmc\n"
      "const p1 = 0.3;\n"
      "component <arrivals>, <departures>;\n"
      "s=<location> -> p1:(s'=<arrivals>) + (1-p1):(s'=<departures>);\n";
  sk = parse_model(web);
  REQUIRE(sk.states.size() == 3);
  CHECK(sk.states[0] == "arrivals");
  const StateIndex loc = 2;
  REQUIRE(sk.jumps[loc].size() == 2);
  CHECK(sk.jumps[loc][0].rate == doctest::Approx(0.3));
  CHECK(sk.jumps[loc][1].rate == doctest::Approx(0.7));
  sk = parse_model(web, {{"p1", 0.5}});
  CHECK(sk.jumps[loc][0].rate == doctest::Approx(0.5));

  CHECK_THROWS_WITH_AS(parse_model("s=<a> -> 0.5:(s'=<b>) + 0.4:(s'=<c>);\n<b>;<c>;"),
                       doctest::Contains("probabilities sum to 0.9"), Error);
  CHECK_THROWS_WITH_AS(parse_model("s=<a> -> 1:(s'=<zzz>);"),
                       doctest::Contains("unknown label"), Error);
  CHECK_THROWS_WITH_AS(parse_model("s=<a> -> 1:(s'=<b>);\ns=<a> -> 1:(s'=<b>);\n<b>;"),
                       doctest::Contains("duplicate command"), Error);
  CHECK_THROWS_AS(parse_model("s=<a> -> 1:(s'=<a>);"), Error);
  CHECK_THROWS_AS(parse_model("s=<a> -> q:(s'=<b>); <b>;"), Error);
  CHECK_THROWS_AS(parse_model("s=<a> -> 1:(s'=<b>) <b>;"), Error);

  sk = parse_model(
      "unit hours; shift 0.25;\n"
      "s=<a> -> rate(4) (s'=<b>);\n"
      "s=<b> -> rate(2*3): 0.5:(s'=<a>) + 0.5:(s'=<c>);\n"
      "<c>;\n"
      "label \"busy\" = s=<a> | s=<b>;\n"
      "init <a> : 0.25, <b>;\n");
  const Ctmc m = sk.build();
  CHECK(m.unit() == TimeUnit::Hours);
  CHECK(sk.time_shift == 0.25);
  CHECK(m.rate(1, 0) == doctest::Approx(3.0));
  CHECK(m.initial(1) == doctest::Approx(0.75));
  CHECK(m.satisfies(0, "busy"));
  CHECK_FALSE(m.satisfies(2, "busy"));
}

TEST_CASE("export and re-parse") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const Ctmc m = random_model(20, seed);
    const std::string text = export_ctmc(m);
    check_isomorphic(m, parse_model(text).build());
  }

  const Ctmc web = omni::testing::web_app_model();
  const std::string text = export_ctmc(web, 0.5);
  CHECK(text.find("s=<complete>") == std::string::npos);
  CHECK(text.find("component <complete>;") != std::string::npos);
  const auto sk = parse_model(text);
  CHECK(sk.time_shift == 0.5);

  std::vector<std::set<std::string>> labels(2);
  labels[1].insert("goal");
  const Ctmc tiny({"x", "y"}, {1, 0}, {{{1, 2.0}}, {}}, labels);
  CHECK(parse_model(export_ctmc(tiny)).build().satisfies(1, "goal"));
}

TEST_CASE("exported joint-delay fragment") {
  const Ctmc web = omni::testing::web_app_model();
  ComponentStats a, s;
  a.delay = 0.045;
  s.delay = 0.209;
  const Ctmc refined = apply_joint_delay_model(
      web, {web.index_of("arrivals"), web.index_of("search")}, {a, s}, RefinementConfig{});
  std::istringstream in(export_ctmc(refined));
  std::string line;
  int chained = 0;
  while (std::getline(in, line)) {
    if (line.rfind("s=<arrivals#d", 0) != 0) continue;
    ++chained;
    CHECK(line.find("rate(1019.68") != std::string::npos);
    CHECK(line.find(" + ") == std::string::npos);
  }
  CHECK(chained == 259);
}

TEST_CASE("normalization fuzz") {
  std::mt19937_64 rng(77);
  int rejected = 0, tried = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    std::istringstream in(export_ctmc(random_model(12, seed)));
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
    std::vector<std::size_t> commands;
    for (std::size_t i = 0; i < lines.size(); ++i)
      if (lines[i].rfind("s=<", 0) == 0) commands.push_back(i);
    if (commands.empty()) continue;
    std::string &victim = lines[commands[rng() % commands.size()]];
    const auto colon = victim.find(":(s'");
    const auto begin = victim.rfind(' ', colon) + 1;
    const double p = std::stod(victim.substr(begin, colon - begin));
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", p + ((rng() % 2) ? 0.1 : -0.1));
    victim.replace(begin, colon - begin, buf);
    std::string text;
    for (const auto &row : lines) text += row + "\n";
    ++tried;
    try {
      parse_model(text);
    } catch (const Error &) {
      ++rejected;
    }
  }
  CHECK(tried > 20);
  CHECK(rejected == tried);
}

TEST_CASE("observation files") {
  CHECK(parse_observations("0.05\n0.10\n", "a", TimeUnit::Seconds).durations.size() == 2);
  auto obs = parse_observations("duration\r\n0.05\r\n", "a", TimeUnit::Seconds);
  CHECK(obs.durations == std::vector<double>{0.05});
  CHECK_THROWS_WITH_AS(parse_observations("0.5\n-1\n", "a", TimeUnit::Seconds, "f.csv"),
                       doctest::Contains("f.csv:2"), Error);
  CHECK_THROWS_AS(parse_observations("", "a", TimeUnit::Seconds), Error);
  CHECK_THROWS_AS(parse_observations("header\n", "a", TimeUnit::Seconds), Error);
  CHECK_THROWS_WITH_AS(parse_observations("1\nabc\n", "a", TimeUnit::Seconds, "g.csv"),
                       doctest::Contains("g.csv:2"), Error);
}

TEST_CASE("config documents") {
  TempDir dir;
  write_text_file(dir.path / "a.csv", "0.5\n0.7\n");
  const std::string json = R"({
    "components": {"a": "a.csv"},
    "unit": "hours", "epsilon": 0.2, "p": 0.1, "delay_threshold": 0.01,
    "fit": {"alpha": 0.05, "max_clusters": 7, "seed": 9},
    "constants": {"p1": 0.4}
  })";
  write_text_file(dir.path / "cfg.json", json);
  const ConfigDoc cfg = load_config(dir.path / "cfg.json");
  CHECK(cfg.unit == TimeUnit::Hours);
  CHECK(cfg.refinement.epsilon == 0.2);
  CHECK(cfg.refinement.tail_probability == 0.1);
  CHECK(cfg.refinement.fit.max_clusters == 7);
  CHECK(cfg.refinement.fit.seed == 9);
  CHECK(cfg.constants.at("p1") == 0.4);
  const auto obs = load_observations(cfg);
  CHECK(obs.at("a").durations.size() == 2);
  CHECK(obs.at("a").unit == TimeUnit::Hours);

  CHECK_THROWS_AS(parse_config(R"({"components": {"b": "missing.csv"}})", dir.path), Error);
  CHECK_THROWS_AS(parse_config(R"({"epsilon": 1.5})", dir.path), Error);
  CHECK_THROWS_AS(parse_config("{not json", dir.path), Error);
}

TEST_CASE("trace logs") {
  const Ctmc web = omni::testing::web_app_model();
  std::vector<TimedTrace> traces;
  for (std::uint64_t s = 1; s <= 20; ++s) traces.push_back(simulate_trace(web, s));
  traces[3].censored = true;
  const auto back = parse_traces(format_traces(web, traces), web);
  REQUIRE(back.size() == traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    CHECK(back[i].terminal == traces[i].terminal);
    CHECK(back[i].censored == traces[i].censored);
    REQUIRE(back[i].steps.size() == traces[i].steps.size());
    for (std::size_t j = 0; j < back[i].steps.size(); ++j) {
      CHECK(back[i].steps[j].state == traces[i].steps[j].state);
      CHECK(back[i].steps[j].sojourn == traces[i].steps[j].sojourn);
    }
  }
  CHECK_THROWS_AS(parse_traces(R"({"steps":[{"component":"nope","duration":1}],"outcome":"complete"})", web), Error);
  CHECK_THROWS_AS(parse_traces("{\"steps\":[]}", web), Error);
}

TEST_CASE("property templates") {
  auto p = parse_property("P=? [ F[0,T] complete ]");
  REQUIRE(p.terms.size() == 1);
  auto prop = p.at(2.0).terms[0].property;
  CHECK(prop.interval.lower == 0.0);
  CHECK(prop.interval.upper == 2.0);
  CHECK(prop.phi2.to_string() == StateFormula::atom("complete").to_string());

  p = parse_property("P2: P=? [ !arrivals U[0,T] complete ] / 0.7");
  CHECK(p.name == "P2");
  CHECK(p.terms[0].coefficient == doctest::Approx(1 / 0.7));

  p = parse_property("P=?[F[0,T] complete] - 2*P=?[!complete U(3,inf) complete]");
  REQUIRE(p.terms.size() == 2);
  CHECK(p.terms[1].coefficient == -2.0);
  const auto late = p.at(1.0).terms[1].property.interval;
  CHECK(late.lower == 3.0);
  CHECK(late.lower_open);
  CHECK(std::isinf(late.upper));

  p = parse_property("P=? [ \"a\" U<=T \"b\" ]");
  CHECK(p.at(4).terms[0].property.interval.upper == 4.0);
  p = parse_property("P=? [ a U b ]");
  CHECK(std::isinf(p.at(4).terms[0].property.interval.upper));

  const auto f = parse_state_formula("a | b & !c");
  const Ctmc m({"a", "b", "c"}, {1, 0, 0}, {{}, {}, {}}, {});
  CHECK(f.holds(m, 0));
  CHECK(f.holds(m, 1));
  CHECK_FALSE(f.holds(m, 2));

  const auto file = parse_property_file("# sweep\nP=? [ F[0,T] complete ]\n\nX: P=?[F<=T a]\n");
  REQUIRE(file.size() == 2);
  CHECK(file[0].name == "P1");
  CHECK(file[1].name == "X");

  CHECK_THROWS_AS(parse_property("P=? [ F[0,T] ]"), Error);
  CHECK_THROWS_AS(parse_property("Q=? [ F[0,T] a ]"), Error);
  CHECK_THROWS_AS(parse_property("P=? [ F[0,T] a ] extra"), Error);
  CHECK_THROWS_AS(parse_property_file("\n# nothing\n"), Error);
}
