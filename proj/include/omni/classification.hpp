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

#ifndef OMNI_CLASSIFICATION_HPP
#define OMNI_CLASSIFICATION_HPP

#include <set>
#include <vector>

#include "omni/markov.hpp"

namespace omni {

/// Absolute tolerance for the probability equality and zero tests.
inline constexpr double kClassificationTolerance = 1e-9;

using StateSet = std::set<StateIndex>;
using StateSequence = std::vector<StateIndex>;

/// Partition of a model's states with respect to one property:
/// exclude-from-refinement, once-only, and together sequences.
struct StatePartition {
  StateSet exclude;
  StateSet once_only;
  std::vector<StateSequence> together;
  PropertyExpr property;

  /// Throws if the groups overlap, miss a state, or a together sequence is
  /// not a chain of unique edges.
  void validate(const Ctmc &model) const;
  std::size_t together_state_count() const;
};

StateSet exclude_set(const Ctmc &model, const UntilProperty &property);

StateSet once_only_set(const Ctmc &model, const UntilProperty &property,
                       const StateSet &exclude);

/// Grows chains of states that can only be traversed as a whole. Seeds are
/// taken in ascending state index order.
std::vector<StateSequence> together_sequences(const Ctmc &model,
                                              const StateSet &exclude,
                                              const StateSet &once_only);

StatePartition classify(const Ctmc &model, const UntilProperty &property);

/// Multi-term expressions: a state is excluded only if every term excludes
/// it and is once-only only if every term says so.
StatePartition classify(const Ctmc &model, const PropertyExpr &expr);

}  // namespace omni

#endif  // OMNI_CLASSIFICATION_HPP
