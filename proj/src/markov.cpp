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

#include "omni/markov.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "omni/error.hpp"

namespace omni {

std::string to_string(TimeUnit unit) {
  return unit == TimeUnit::Hours ? "hours" : "seconds";
}

TimeUnit parse_time_unit(const std::string &text) {
  if (text == "s" || text == "seconds" || text == "second") {
    return TimeUnit::Seconds;
  }
  if (text == "h" || text == "hours" || text == "hour") return TimeUnit::Hours;
  fail_validation("unknown time unit '" + text + "'");
}

Ctmc::Ctmc(std::vector<std::string> names, std::vector<double> initial,
           std::vector<std::vector<Transition>> rows,
           std::vector<std::set<std::string>> labels, TimeUnit unit)
    : names_(std::move(names)),
      initial_(std::move(initial)),
      labels_(std::move(labels)),
      unit_(unit) {
  const std::size_t n = names_.size();
  if (n == 0) fail_validation("model has no states");
  if (initial_.size() != n || rows.size() != n) {
    fail_validation("state, initial and rate dimensions differ");
  }
  if (labels_.empty()) labels_.resize(n);
  if (labels_.size() != n) fail_validation("label table size differs");

  for (StateIndex s = 0; s < n; ++s) {
    if (names_[s].empty()) fail_validation("empty state name");
    if (!index_.emplace(names_[s], s).second) {
      fail_validation("duplicate state '" + names_[s] + "'");
    }
  }

  double mass = 0.0;
  for (StateIndex s = 0; s < n; ++s) {
    const double p = initial_[s];
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      fail_validation("initial probability of '" + names_[s] +
                      "' outside [0,1]");
    }
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "initial distribution sums to " << mass;
    fail_validation(msg.str());
  }

  rows_.resize(n);
  exit_.assign(n, 0.0);
  for (StateIndex s = 0; s < n; ++s) {
    std::map<StateIndex, double> merged;
    for (const Transition &t : rows[s]) {
      if (t.target >= n) fail_validation("transition target out of range");
      if (!std::isfinite(t.rate) || t.rate < 0.0) {
        fail_validation("non-finite or negative rate out of '" + names_[s] +
                        "'");
      }
      if (t.target == s) {
        if (t.rate > 0.0) {
          fail_validation("self-loop rate on '" + names_[s] + "'");
        }
        continue;
      }
      if (t.rate > 0.0) merged[t.target] += t.rate;
    }
    rows_[s].reserve(merged.size());
    for (const auto &[target, rate] : merged) {
      rows_[s].push_back({target, rate});
      exit_[s] += rate;
    }
  }
}

std::size_t Ctmc::transition_count() const {
  std::size_t count = 0;
  for (const auto &row : rows_) count += row.size();
  return count;
}

std::optional<StateIndex> Ctmc::find(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

StateIndex Ctmc::index_of(const std::string &name) const {
  auto found = find(name);
  if (!found) fail_validation("unknown state '" + name + "'");
  return *found;
}

double Ctmc::rate(StateIndex from, StateIndex to) const {
  if (from == to) return diagonal(from);
  for (const Transition &t : rows_[from]) {
    if (t.target == to) return t.rate;
  }
  return 0.0;
}

double Ctmc::max_exit_rate() const {
  return exit_.empty() ? 0.0 : *std::max_element(exit_.begin(), exit_.end());
}

bool Ctmc::satisfies(StateIndex s, const std::string &proposition) const {
  return names_[s] == proposition || labels_[s].count(proposition) > 0;
}

// ---------------------------------------------------------------------------

struct StateFormula::Node {
  enum class Kind { True, Atom, Not, And } kind;
  std::string name;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

StateFormula::StateFormula(std::shared_ptr<const Node> node)
    : node_(std::move(node)) {}

StateFormula::StateFormula() : StateFormula(truth()) {}

StateFormula StateFormula::truth() {
  static const auto node =
      std::make_shared<const Node>(Node{Node::Kind::True, {}, {}, {}});
  return StateFormula(node);
}

StateFormula StateFormula::falsity() { return negation(truth()); }

StateFormula StateFormula::atom(std::string proposition) {
  if (proposition.empty()) fail_validation("empty atomic proposition");
  return StateFormula(std::make_shared<const Node>(
      Node{Node::Kind::Atom, std::move(proposition), {}, {}}));
}

StateFormula StateFormula::negation(StateFormula operand) {
  return StateFormula(std::make_shared<const Node>(
      Node{Node::Kind::Not, {}, std::move(operand.node_), {}}));
}

StateFormula StateFormula::conjunction(StateFormula lhs, StateFormula rhs) {
  return StateFormula(std::make_shared<const Node>(
      Node{Node::Kind::And, {}, std::move(lhs.node_), std::move(rhs.node_)}));
}

StateFormula StateFormula::disjunction(StateFormula lhs, StateFormula rhs) {
  return negation(conjunction(negation(std::move(lhs)),
                              negation(std::move(rhs))));
}

bool StateFormula::holds(const Ctmc &model, StateIndex s) const {
  const Node *node = node_.get();
  bool negate = false;
  while (node->kind == Node::Kind::Not) {
    negate = !negate;
    node = node->lhs.get();
  }
  bool value = false;
  switch (node->kind) {
    case Node::Kind::True:
      value = true;
      break;
    case Node::Kind::Atom:
      value = model.satisfies(s, node->name);
      break;
    case Node::Kind::And:
      value = StateFormula(node->lhs).holds(model, s) &&
              StateFormula(node->rhs).holds(model, s);
      break;
    case Node::Kind::Not:
      break;
  }
  return negate ? !value : value;
}

std::vector<bool> StateFormula::mask(const Ctmc &model) const {
  std::vector<bool> out(model.size());
  for (StateIndex s = 0; s < model.size(); ++s) out[s] = holds(model, s);
  return out;
}

std::string StateFormula::to_string() const {
  switch (node_->kind) {
    case Node::Kind::True:
      return "true";
    case Node::Kind::Atom:
      return "\"" + node_->name + "\"";
    case Node::Kind::Not:
      if (node_->lhs->kind == Node::Kind::True) return "false";
      return "!" + StateFormula(node_->lhs).to_string();
    case Node::Kind::And:
      return "(" + StateFormula(node_->lhs).to_string() + " & " +
             StateFormula(node_->rhs).to_string() + ")";
  }
  return {};
}

std::set<std::string> StateFormula::propositions() const {
  std::set<std::string> out;
  std::vector<const Node *> pending{node_.get()};
  while (!pending.empty()) {
    const Node *node = pending.back();
    pending.pop_back();
    if (node->kind == Node::Kind::Atom) out.insert(node->name);
    if (node->lhs) pending.push_back(node->lhs.get());
    if (node->rhs) pending.push_back(node->rhs.get());
  }
  return out;
}

// ---------------------------------------------------------------------------

void TimeInterval::validate() const {
  if (std::isnan(lower) || std::isnan(upper) || lower < 0.0 ||
      lower == kInfinity) {
    fail_validation("invalid interval lower bound");
  }
  if (upper < lower) fail_validation("interval upper bound below lower bound");
}

namespace {

std::string format_bound(double value) {
  if (value == kInfinity) return "inf";
  std::ostringstream out;
  out.precision(12);
  out << value;
  return out.str();
}

}  // namespace

std::string TimeInterval::to_string() const {
  return std::string(lower_open ? "(" : "[") + format_bound(lower) + "," +
         format_bound(upper) + (upper_open || upper == kInfinity ? ")" : "]");
}

std::string UntilProperty::to_string() const {
  return "P=? [ " + phi1.to_string() + " U" + interval.to_string() + " " +
         phi2.to_string() + " ]";
}

void PropertyExpr::validate() const {
  if (terms.empty()) fail_validation("property expression has no terms");
  for (const Term &term : terms) {
    if (!std::isfinite(term.coefficient)) {
      fail_validation("non-finite property coefficient");
    }
    term.property.interval.validate();
  }
}

double TimedTrace::duration() const {
  double total = 0.0;
  for (const TraceStep &step : steps) total += step.sojourn;
  return total;
}

}  // namespace omni
