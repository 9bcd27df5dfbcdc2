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

#include "omni/classification.hpp"

#include <algorithm>
#include <cmath>

#include "omni/error.hpp"

namespace omni {

namespace {

double until_avoiding(const Ctmc &model, std::vector<bool> phi1,
                      const std::vector<bool> &phi2, StateIndex avoided) {
  phi1[avoided] = false;
  return unbounded_until(model, phi1, phi2).value;
}

// Pred/Succ helpers of the together-sequence growth.
bool only_edge(const Ctmc &model, StateIndex from, StateIndex to,
               const std::vector<std::vector<StateIndex>> &incoming) {
  const auto row = model.transitions(from);
  if (row.size() != 1 || row.front().target != to) return false;
  return incoming[to].size() == 1 && incoming[to].front() == from;
}

std::optional<StateIndex> predecessor(
    const Ctmc &model, StateIndex head, const StateSet &pending,
    const std::vector<std::vector<StateIndex>> &incoming) {
  if (model.initial(head) > 0.0) return std::nullopt;
  for (StateIndex candidate : pending) {
    if (only_edge(model, candidate, head, incoming)) return candidate;
  }
  return std::nullopt;
}

std::optional<StateIndex> successor(
    const Ctmc &model, StateIndex tail, const StateSet &pending,
    const std::vector<std::vector<StateIndex>> &incoming) {
  for (StateIndex candidate : pending) {
    if (model.initial(candidate) == 0.0 &&
        only_edge(model, tail, candidate, incoming)) {
      return candidate;
    }
  }
  return std::nullopt;
}

}  // namespace

StateSet exclude_set(const Ctmc &model, const UntilProperty &property) {
  const std::vector<bool> phi1 = property.phi1.mask(model);
  const std::vector<bool> phi2 = property.phi2.mask(model);
  const double reference = unbounded_until(model, phi1, phi2).value;
  StateSet out;
  for (StateIndex s = 0; s < model.size(); ++s) {
    if (std::abs(until_avoiding(model, phi1, phi2, s) - reference) <=
        kClassificationTolerance) {
      out.insert(s);
    }
  }
  return out;
}

StateSet once_only_set(const Ctmc &model, const UntilProperty &property,
                       const StateSet &exclude) {
  const std::vector<bool> phi1 = property.phi1.mask(model);
  const std::vector<bool> phi2 = property.phi2.mask(model);
  StateSet out;
  if (unbounded_until(model, phi1, phi2).value <= kClassificationTolerance) {
    return out;
  }

  std::vector<bool> outside_exclude(model.size(), true);
  for (StateIndex s : exclude) outside_exclude[s] = false;

  for (StateIndex s = 0; s < model.size(); ++s) {
    if (exclude.count(s)) continue;
    if (until_avoiding(model, phi1, phi2, s) > kClassificationTolerance) {
      continue;
    }
    // No successor may lead back to s without passing through S_X.
    std::vector<bool> target(model.size(), false);
    target[s] = true;
    const UntilProbabilities back =
        unbounded_until(model, outside_exclude, target);
    const auto row = model.transitions(s);
    const bool revisits =
        std::any_of(row.begin(), row.end(), [&](const Transition &t) {
          return back.per_state[t.target] > kClassificationTolerance;
        });
    if (!revisits) out.insert(s);
  }
  return out;
}

std::vector<StateSequence> together_sequences(const Ctmc &model,
                                              const StateSet &exclude,
                                              const StateSet &once_only) {
  std::vector<std::vector<StateIndex>> incoming(model.size());
  for (StateIndex s = 0; s < model.size(); ++s) {
    for (const Transition &t : model.transitions(s)) {
      incoming[t.target].push_back(s);
    }
  }

  StateSet pending;
  for (StateIndex s = 0; s < model.size(); ++s) {
    if (!exclude.count(s) && !once_only.count(s)) pending.insert(s);
  }

  std::vector<StateSequence> out;
  while (!pending.empty()) {
    StateSequence seq{*pending.begin()};
    pending.erase(pending.begin());
    bool left = true;
    bool right = true;
    while ((left || right) && !pending.empty()) {
      if (left) {
        if (auto s = predecessor(model, seq.front(), pending, incoming)) {
          seq.insert(seq.begin(), *s);
          pending.erase(*s);
        } else {
          left = false;
        }
      }
      if (right) {
        if (auto s = successor(model, seq.back(), pending, incoming)) {
          seq.push_back(*s);
          pending.erase(*s);
        } else {
          right = false;
        }
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

StatePartition classify(const Ctmc &model, const UntilProperty &property) {
  StatePartition out;
  out.exclude = exclude_set(model, property);
  out.once_only = once_only_set(model, property, out.exclude);
  out.together = together_sequences(model, out.exclude, out.once_only);
  out.property = PropertyExpr::single(property);
  return out;
}

StatePartition classify(const Ctmc &model, const PropertyExpr &expr) {
  expr.validate();
  StatePartition out;
  bool first = true;
  for (const auto &term : expr.terms) {
    const StateSet exclude = exclude_set(model, term.property);
    const StateSet once = once_only_set(model, term.property, exclude);
    if (first) {
      out.exclude = exclude;
      out.once_only = once;
      first = false;
      continue;
    }
    StateSet keep;
    std::set_intersection(out.exclude.begin(), out.exclude.end(),
                          exclude.begin(), exclude.end(),
                          std::inserter(keep, keep.end()));
    out.exclude = std::move(keep);
    keep.clear();
    std::set_intersection(out.once_only.begin(), out.once_only.end(),
                          once.begin(), once.end(),
                          std::inserter(keep, keep.end()));
    out.once_only = std::move(keep);
  }
  out.together = together_sequences(model, out.exclude, out.once_only);
  out.property = expr;
  return out;
}

void StatePartition::validate(const Ctmc &model) const {
  std::vector<int> seen(model.size(), 0);
  auto mark = [&](StateIndex s) {
    if (s >= model.size()) fail_validation("partition state out of range");
    ++seen[s];
  };
  for (StateIndex s : exclude) mark(s);
  for (StateIndex s : once_only) mark(s);
  for (const StateSequence &seq : together) {
    if (seq.empty()) fail_validation("empty together sequence");
    for (StateIndex s : seq) mark(s);
  }
  for (StateIndex s = 0; s < model.size(); ++s) {
    if (seen[s] != 1) {
      fail_validation("state '" + model.name(s) +
                      "' is not covered exactly once by the partition");
    }
  }
  for (const StateSequence &seq : together) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const StateIndex a = seq[i];
      const StateIndex b = seq[i + 1];
      const auto row = model.transitions(a);
      if (row.size() != 1 || row.front().target != b ||
          model.initial(b) > 0.0) {
        fail_validation("together sequence link " + model.name(a) + " -> " +
                        model.name(b) + " is not a unique edge");
      }
      for (StateIndex s = 0; s < model.size(); ++s) {
        if (s != a && model.rate(s, b) > 0.0 && s != b) {
          fail_validation("together sequence member '" + model.name(b) +
                          "' has a second predecessor");
        }
      }
    }
  }
}

std::size_t StatePartition::together_state_count() const {
  std::size_t n = 0;
  for (const auto &seq : together) n += seq.size();
  return n;
}

}  // namespace omni
