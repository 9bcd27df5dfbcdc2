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

#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "omni/classification.hpp"
#include "omni/error.hpp"

using namespace omni;
using omni::testing::web_app_model;

namespace {

StateSet states(const Ctmc &m, std::initializer_list<const char *> names) {
  StateSet out;
  for (const char *n : names) out.insert(m.index_of(n));
  return out;
}

StateSequence seq(const Ctmc &m, std::initializer_list<const char *> names) {
  StateSequence out;
  for (const char *n : names) out.push_back(m.index_of(n));
  return out;
}

Ctmc linear_chain() {
  return Ctmc({"s1", "s2", "done"}, {1, 0, 0}, {{{1, 1.0}}, {{2, 2.0}}, {}},
              {});
}

Ctmc scaled(const Ctmc &m, double factor) {
  auto rows = m.rows();
  for (auto &row : rows) {
    for (auto &t : row) t.rate *= factor;
  }
  return Ctmc(m.names(), m.initial(), rows, m.all_labels());
}

}  // namespace

TEST_CASE("exclude set") {
  const Ctmc web = web_app_model();
  CHECK(exclude_set(web, omni::testing::web_p2(1.0)) ==
        states(web, {"arrivals", "search", "complete"}));
  CHECK(exclude_set(web, omni::testing::web_p1(1.0)) ==
        states(web, {"complete"}));

  const Ctmc line = linear_chain();
  CHECK(exclude_set(line, UntilProperty::eventually(
                              StateFormula::atom("done"))) ==
        states(line, {"done"}));
}

TEST_CASE("once-only set") {
  const Ctmc web = web_app_model();
  const auto p1 = omni::testing::web_p1(1.0);
  const StateSet once = once_only_set(web, p1, exclude_set(web, p1));
  CHECK(once == states(web, {"location", "traffic"}));
  // arrivals can be avoided: P[!arrivals U complete] = 1 - p1 > 0.
  CHECK(once.count(web.index_of("arrivals")) == 0);

  const Ctmc line = linear_chain();
  const auto done = UntilProperty::eventually(StateFormula::atom("done"));
  CHECK(once_only_set(line, done, exclude_set(line, done)) ==
        states(line, {"s1", "s2"}));

  // Unreachable target: nothing is once-only.
  const auto never = UntilProperty::eventually(StateFormula::atom("nowhere"));
  CHECK(once_only_set(web, never, exclude_set(web, never)).empty());
}

TEST_CASE("once-only rejects states on a loop") {
  // a -> b -> a loop with exit to done from b.
  const Ctmc loop({"a", "b", "done"}, {1, 0, 0},
                  {{{1, 1.0}}, {{0, 1.0}, {2, 1.0}}, {}}, {});
  const auto done = UntilProperty::eventually(StateFormula::atom("done"));
  const StateSet exclude = exclude_set(loop, done);
  CHECK(once_only_set(loop, done, exclude).empty());
}

TEST_CASE("together sequences") {
  const Ctmc web = web_app_model();
  const auto p2 = omni::testing::web_p2(1.0);
  const StateSet x2 = exclude_set(web, p2);
  const auto t2 = together_sequences(web, x2, once_only_set(web, p2, x2));
  REQUIRE(t2.size() == 1);
  CHECK(t2[0] == seq(web, {"departures", "weather"}));

  CHECK(together_sequences(web, states(web, {"complete"}),
                           states(web, {"location", "traffic"})) ==
        std::vector<StateSequence>{seq(web, {"arrivals", "search"}),
                                   seq(web, {"departures", "weather"})});

  StateSet all;
  for (StateIndex s = 0; s < web.size(); ++s) all.insert(s);
  CHECK(together_sequences(web, all, {}).empty());

  SUBCASE("growth to the left from a mid-sequence seed") {
    // State 0 ("mid") is seeded first; "head" is found by Pred, "tail" by
    // Succ.
    const Ctmc chain({"mid", "head", "tail", "start", "done"},
                     {0, 0, 0, 1, 0},
                     {{{2, 1.0}}, {{0, 1.0}}, {{4, 1.0}}, {{1, 1.0}}, {}}, {});
    const auto t = together_sequences(chain, states(chain, {"done"}),
                                      states(chain, {"start"}));
    CHECK(t == std::vector<StateSequence>{seq(chain, {"head", "mid", "tail"})});
  }
}

TEST_CASE("classify reproduces the travel application partitions") {
  const Ctmc web = web_app_model();

  const StatePartition p1 = classify(web, omni::testing::web_p1(1.0));
  CHECK(p1.exclude == states(web, {"complete"}));
  CHECK(p1.once_only == states(web, {"location", "traffic"}));
  CHECK(p1.together ==
        std::vector<StateSequence>{seq(web, {"arrivals", "search"}),
                                   seq(web, {"departures", "weather"})});

  const StatePartition p2 = classify(web, omni::testing::web_p2(1.0));
  CHECK(p2.exclude == states(web, {"arrivals", "search", "complete"}));
  CHECK(p2.once_only == states(web, {"location", "traffic"}));
  CHECK(p2.together ==
        std::vector<StateSequence>{seq(web, {"departures", "weather"})});

  const StatePartition p3 = classify(web, omni::testing::web_p3(1.0));
  CHECK(p3.exclude == p1.exclude);
  CHECK(p3.once_only == p1.once_only);
  CHECK(p3.together == p1.together);

  for (const auto *p : {&p1, &p2, &p3}) CHECK_NOTHROW(p->validate(web));
}

TEST_CASE("partition validation catches broken partitions") {
  const Ctmc web = web_app_model();
  StatePartition bad = classify(web, omni::testing::web_p1(1.0));
  bad.exclude.insert(web.index_of("location"));
  CHECK_THROWS_AS(bad.validate(web), Error);

  StatePartition broken_chain = classify(web, omni::testing::web_p1(1.0));
  std::swap(broken_chain.together[0][0], broken_chain.together[0][1]);
  CHECK_THROWS_AS(broken_chain.validate(web), Error);
}

TEST_CASE("classification properties on random acyclic models") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const Ctmc m = omni::testing::random_acyclic_model(10, seed);
    const StateFormula phi1 =
        (seed % 2) ? StateFormula::truth()
                   : StateFormula::negation(StateFormula::atom("busy"));
    const UntilProperty prop{phi1, StateFormula::atom("goal"),
                             TimeInterval::closed(0, 1.0)};
    const StatePartition part = classify(m, prop);
    CAPTURE(seed);
    CHECK_NOTHROW(part.validate(m));

    const double reference = unbounded_until(m, phi1, prop.phi2).value;
    for (StateIndex s : part.exclude) {
      const auto without = StateFormula::conjunction(
          StateFormula::negation(StateFormula::atom(m.name(s))), phi1);
      CHECK(std::abs(unbounded_until(m, without, prop.phi2).value -
                     reference) <= kClassificationTolerance);
    }

    const StatePartition fast = classify(m, prop);
    const StatePartition rescaled = classify(scaled(m, 13.0), prop);
    CHECK(rescaled.exclude == fast.exclude);
    CHECK(rescaled.once_only == fast.once_only);
    CHECK(rescaled.together == fast.together);
  }
}
