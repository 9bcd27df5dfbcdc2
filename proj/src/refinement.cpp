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

#include "omni/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "omni/error.hpp"

namespace omni {

void RefinementConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail_validation("epsilon must lie in (0,1)");
  if (!(tail_probability > 0.0 && tail_probability < 1.0))
    fail_validation("tail probability must lie in (0,1)");
  if (!(delay_threshold >= 0.0) || !std::isfinite(delay_threshold))
    fail_validation("delay threshold must be >= 0");
  fit.validate();
}

std::uint64_t RefinementConfig::hash() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g|%.17g|%.17g|%llu", epsilon,
                tail_probability, delay_threshold,
                static_cast<unsigned long long>(fit.hash()));
  std::uint64_t h = 1469598103934665603ULL;
  for (const char *p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

// probability the Erlang-k chain completes before k(1 - eps) mean-one units
double early_exit(long k, double epsilon) {
  return erlang_cdf(k, 1.0, static_cast<double>(k) * (1.0 - epsilon));
}

}  // namespace

long solve_erlang_phase_count(double epsilon, double p) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail_validation("epsilon must lie in (0,1)");
  if (!(p > 0.0 && p < 1.0)) fail_validation("tail probability must lie in (0,1)");
  if (early_exit(1, epsilon) <= p) return 1;
  long hi = 2;
  while (early_exit(hi, epsilon) > p) {
    if (hi > (1L << 40)) fail_solver("Erlang phase count does not converge");
    hi *= 2;
  }
  long lo = hi / 2;  // early_exit(lo) > p
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    if (early_exit(mid, epsilon) <= p)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

namespace {

constexpr double kVanishingTolerance = 1e-9;

}  // namespace

ErlangDelayModel erlang_delay_model(const std::vector<double> &rates,
                                    const std::vector<double> &delays,
                                    const RefinementConfig &cfg) {
  cfg.validate();
  if (rates.size() != delays.size() || rates.empty())
    fail_validation("delay model needs one rate and delay per member");
  ErlangDelayModel out;
  for (std::size_t j = 0; j < rates.size(); ++j) {
    const double lambda = rates[j], delta = delays[j];
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      fail_validation("together member must have a positive exit rate");
    if (!(delta >= 0.0) || !std::isfinite(delta))
      fail_validation("delay must be finite and >= 0");
    const double load = lambda * delta;
    if (load > 1.0 + kVanishingTolerance)
      fail_validation("delay exceeds mean: rate * delay = " + std::to_string(load));
    out.adjusted_rates.push_back(load >= 1.0 - kVanishingTolerance
                                     ? kInfinity
                                     : lambda / (1.0 - load));
    out.joint_delay += delta;
  }
  if (out.joint_delay > 0.0) {
    out.phases = solve_erlang_phase_count(cfg.epsilon, cfg.tail_probability);
    out.erlang_rate = static_cast<double>(out.phases) / out.joint_delay;
  }
  return out;
}

std::string to_string(RefinedRole role) {
  switch (role) {
    case RefinedRole::Copy: return "copy";
    case RefinedRole::DelayPhase: return "delay-phase";
    case RefinedRole::PhdPhase: return "phd-phase";
  }
  return "?";
}

namespace {

// Mutable model used while refining; keeps per-state provenance aligned.
struct Draft {
  std::vector<std::string> names;
  std::vector<double> initial;
  std::vector<std::vector<Transition>> rows;
  std::vector<std::set<std::string>> labels;
  std::vector<StateOrigin> origin;
  TimeUnit unit = TimeUnit::Seconds;

  static Draft from(const Ctmc &m) {
    Draft d;
    d.names = m.names();
    d.initial = m.initial();
    d.rows = m.rows();
    d.labels = m.all_labels();
    d.unit = m.unit();
    for (const auto &n : d.names) d.origin.push_back({n, RefinedRole::Copy});
    return d;
  }

  std::size_t size() const { return names.size(); }

  Ctmc build() const { return Ctmc(names, initial, rows, labels, unit); }

  double exit(StateIndex s) const {
    double r = 0.0;
    for (const auto &t : rows[s]) r += t.rate;
    return r;
  }

  StateIndex index(const std::string &name) const {
    for (StateIndex s = 0; s < names.size(); ++s)
      if (names[s] == name) return s;
    fail_validation("unknown state '" + name + "'");
  }

  void push(std::string name, double init, std::set<std::string> labs,
            StateOrigin org) {
    names.push_back(std::move(name));
    initial.push_back(init);
    rows.emplace_back();
    labels.push_back(std::move(labs));
    origin.push_back(std::move(org));
  }
};

std::set<std::string> inherited_labels(const Draft &d, StateIndex s) {
  auto labs = d.labels[s];
  labs.insert(d.names[s]);
  return labs;
}

void check_sequence(const Draft &d, const StateSequence &seq) {
  if (seq.empty()) fail_validation("empty together sequence");
  std::set<StateIndex> seen;
  for (StateIndex s : seq) {
    if (s >= d.size()) fail_validation("together member out of range");
    if (!seen.insert(s).second) fail_validation("repeated together member");
    if (d.rows[s].empty())
      fail_validation("together member '" + d.names[s] + "' is absorbing");
  }
  for (std::size_t j = 0; j + 1 < seq.size(); ++j) {
    const auto &row = d.rows[seq[j]];
    if (row.size() != 1 || row.front().target != seq[j + 1] ||
        d.initial[seq[j + 1]] > 0.0)
      fail_validation("together link " + d.names[seq[j]] + " -> " +
                      d.names[seq[j + 1]] + " is not a unique edge");
  }
  for (StateIndex s = 0; s < d.size(); ++s) {
    for (const auto &t : d.rows[s]) {
      if (!seen.count(t.target) || t.target == seq.front()) continue;
      const auto pos = std::find(seq.begin(), seq.end(), t.target) - seq.begin();
      if (pos == 0 || seq[static_cast<std::size_t>(pos) - 1] != s)
        fail_validation("state '" + d.names[t.target] +
                        "' is entered from outside its together sequence");
    }
  }
}

Draft eliminate(const Draft &d, StateIndex v) {
  const double out_rate = d.exit(v);
  if (!(out_rate > 0.0))
    fail_validation("cannot eliminate absorbing state '" + d.names[v] + "'");
  Draft n;
  n.unit = d.unit;
  std::vector<StateIndex> remap(d.size());
  for (StateIndex s = 0, k = 0; s < d.size(); ++s)
    if (s != v) remap[s] = k++;
  for (StateIndex s = 0; s < d.size(); ++s) {
    if (s == v) continue;
    n.push(d.names[s], d.initial[s], d.labels[s], d.origin[s]);
  }
  for (const auto &t : d.rows[v])
    n.initial[remap[t.target]] += d.initial[v] * t.rate / out_rate;
  for (StateIndex s = 0; s < d.size(); ++s) {
    if (s == v) continue;
    auto &row = n.rows[remap[s]];
    for (const auto &t : d.rows[s]) {
      if (t.target != v) {
        row.push_back({remap[t.target], t.rate});
        continue;
      }
      for (const auto &q : d.rows[v]) {
        // v -> s back-edges collapse into staying put
        if (q.target == s) continue;
        row.push_back({remap[q.target], t.rate * q.rate / out_rate});
      }
    }
  }
  return n;
}

Draft joint_delay(const Draft &d, const StateSequence &seq,
                  const ErlangDelayModel &dm) {
  const StateIndex head = seq.front(), tail = seq.back();
  if (!(dm.joint_delay > 0.0)) return d;
  const std::set<StateIndex> members(seq.begin(), seq.end());
  const std::size_t k = static_cast<std::size_t>(dm.phases);
  Draft n;
  n.unit = d.unit;
  std::vector<StateIndex> remap(d.size(), 0);
  StateIndex z1 = 0;
  std::vector<StateIndex> prime(seq.size());
  for (StateIndex s = 0; s < d.size(); ++s) {
    if (s == head) {
      z1 = n.size();
      const auto labs = inherited_labels(d, head);
      for (std::size_t i = 1; i <= k; ++i)
        n.push(d.names[head] + "#d" + std::to_string(i),
               i == 1 ? d.initial[head] : 0.0, labs,
               {d.origin[head].component, RefinedRole::DelayPhase});
      for (std::size_t j = 0; j < seq.size(); ++j) {
        prime[j] = n.size();
        n.push(d.names[seq[j]], 0.0, d.labels[seq[j]], d.origin[seq[j]]);
      }
    } else if (!members.count(s)) {
      remap[s] = n.size();
      n.push(d.names[s], d.initial[s], d.labels[s], d.origin[s]);
    }
  }
  auto target_of = [&](StateIndex u) { return u == head ? z1 : remap[u]; };
  for (StateIndex s = 0; s < d.size(); ++s) {
    if (members.count(s)) continue;
    for (const auto &t : d.rows[s]) n.rows[remap[s]].push_back({target_of(t.target), t.rate});
  }
  for (std::size_t i = 0; i < k; ++i)
    n.rows[z1 + i].push_back({i + 1 < k ? z1 + i + 1 : prime[0], dm.erlang_rate});
  std::vector<StateIndex> vanishing;
  for (std::size_t j = 0; j < seq.size(); ++j) {
    double lam = dm.adjusted_rates[j];
    const bool gone = std::isinf(lam);
    // a vanishing member keeps its jump probabilities until it is removed
    if (gone) lam = d.exit(seq[j]);
    if (gone) vanishing.push_back(prime[j]);
    if (j + 1 < seq.size()) {
      n.rows[prime[j]].push_back({prime[j + 1], lam});
    } else {
      const double base = d.exit(tail);
      for (const auto &t : d.rows[tail])
        n.rows[prime[j]].push_back({target_of(t.target), t.rate / base * lam});
    }
  }
  std::sort(vanishing.rbegin(), vanishing.rend());
  for (StateIndex v : vanishing) n = eliminate(n, v);
  return n;
}

Draft replace_with_phd(const Draft &d, StateIndex target, const HyperErlangPhd &phd) {
  const double lam = d.exit(target);
  if (!(lam > 0.0))
    fail_validation("cannot replace absorbing state '" + d.names[target] + "'");
  const auto &br = phd.branches();
  Draft n;
  n.unit = d.unit;
  std::vector<StateIndex> remap(d.size(), 0);
  std::vector<StateIndex> first(br.size());
  for (StateIndex s = 0; s < d.size(); ++s) {
    if (s != target) {
      remap[s] = n.size();
      n.push(d.names[s], d.initial[s], d.labels[s], d.origin[s]);
      continue;
    }
    const auto labs = inherited_labels(d, target);
    for (std::size_t b = 0; b < br.size(); ++b) {
      first[b] = n.size();
      for (long p = 1; p <= br[b].phases; ++p)
        n.push(d.names[target] + "#h" + std::to_string(b + 1) + "." + std::to_string(p),
               p == 1 ? d.initial[target] * br[b].weight : 0.0, labs,
               {d.origin[target].component, RefinedRole::PhdPhase});
    }
  }
  for (StateIndex s = 0; s < d.size(); ++s) {
    if (s == target) continue;
    for (const auto &t : d.rows[s]) {
      if (t.target != target) {
        n.rows[remap[s]].push_back({remap[t.target], t.rate});
        continue;
      }
      for (std::size_t b = 0; b < br.size(); ++b)
        n.rows[remap[s]].push_back({first[b], t.rate * br[b].weight});
    }
  }
  for (std::size_t b = 0; b < br.size(); ++b) {
    const auto phases = static_cast<std::size_t>(br[b].phases);
    for (std::size_t p = 0; p + 1 < phases; ++p)
      n.rows[first[b] + p].push_back({first[b] + p + 1, br[b].rate});
    const StateIndex last = first[b] + phases - 1;
    for (const auto &t : d.rows[target])
      n.rows[last].push_back({remap[t.target], t.rate / lam * br[b].rate});
  }
  return n;
}

std::vector<double> member_delays(const std::vector<ComponentStats> &stats,
                                  double threshold) {
  std::vector<double> out;
  for (const auto &st : stats) out.push_back(st.delay >= threshold ? st.delay : 0.0);
  return out;
}

}  // namespace

Ctmc apply_joint_delay_model(const Ctmc &model, const StateSequence &seq,
                             const std::vector<ComponentStats> &stats,
                             const RefinementConfig &cfg) {
  const Draft d = Draft::from(model);
  check_sequence(d, seq);
  if (stats.size() != seq.size())
    fail_validation("need one ComponentStats per together member");
  std::vector<double> rates;
  for (StateIndex s : seq) rates.push_back(model.exit_rate(s));
  const auto dm = erlang_delay_model(rates, member_delays(stats, cfg.delay_threshold), cfg);
  return joint_delay(d, seq, dm).build();
}

Ctmc apply_phd_replacement(const Ctmc &model, StateIndex target,
                           const HyperErlangPhd &phd) {
  if (target >= model.size()) fail_validation("replacement target out of range");
  return replace_with_phd(Draft::from(model), target, phd).build();
}

Ctmc eliminate_vanishing_state(const Ctmc &model, StateIndex state) {
  if (state >= model.size()) fail_validation("state out of range");
  return eliminate(Draft::from(model), state).build();
}

std::shared_ptr<const FitResult> FitCache::get_or_fit(const std::string &component,
                                                      const std::string &role,
                                                      std::uint64_t config_hash,
                                                      const Fitter &fit) {
  const Key key{component, role, config_hash};
  std::promise<std::shared_ptr<const FitResult>> promise;
  std::shared_future<std::shared_ptr<const FitResult>> future;
  bool owner = false;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      ++hits_;
      future = it->second;
    } else {
      ++fits_;
      owner = true;
      future = promise.get_future().share();
      entries_.emplace(key, future);
    }
  }
  if (owner) {
    try {
      promise.set_value(std::make_shared<const FitResult>(fit()));
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard<std::mutex> lock(mutex_);
      entries_.erase(key);  // let a later call retry
    }
  }
  return future.get();
}

std::size_t FitCache::fits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return fits_;
}

std::size_t FitCache::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

RefinedModel refine_for_property(const Ctmc &model, const PropertyExpr &expr,
                                 const ObservationMap &observations,
                                 const RefinementConfig &cfg, FitCache &cache) {
  cfg.validate();
  RefinedModel out;
  out.partition = classify(model, expr);
  const StatePartition &part = out.partition;

  std::map<std::string, ComponentStats> stats;
  auto need = [&](StateIndex s) {
    const std::string &name = model.name(s);
    auto it = observations.find(name);
    if (it == observations.end())
      fail_validation("missing observations for component '" + name + "'");
    stats.emplace(name, estimate_component_stats(it->second));
  };
  std::vector<StateIndex> once;
  for (StateIndex s : part.once_only) {
    if (model.is_absorbing(s)) continue;  // no sojourn to model
    once.push_back(s);
    need(s);
  }
  for (const auto &seq : part.together)
    for (StateIndex s : seq) need(s);

  // delay models first: they decide which members still need a fit
  struct Job {
    std::string component, role;
    std::vector<double> holdings;
  };
  std::vector<Job> jobs;
  std::vector<std::pair<StateSequence, ErlangDelayModel>> delays;
  for (StateIndex s : once) {
    const auto &st = stats.at(model.name(s));
    jobs.push_back({st.component, "holding", st.holdings});
    out.time_shift += st.delay;
  }
  for (const auto &seq : part.together) {
    std::vector<double> rates, dl;
    for (StateIndex s : seq) {
      const auto &st = stats.at(model.name(s));
      rates.push_back(model.exit_rate(s));
      dl.push_back(st.delay >= cfg.delay_threshold ? st.delay : 0.0);
    }
    auto dm = erlang_delay_model(rates, dl, cfg);
    for (std::size_t j = 0; j < seq.size(); ++j) {
      if (std::isinf(dm.adjusted_rates[j])) continue;
      const auto &st = stats.at(model.name(seq[j]));
      if (dl[j] > 0.0)
        jobs.push_back({st.component, "holding", st.holdings});
      else
        jobs.push_back({st.component, "raw", observations.at(st.component).durations});
    }
    delays.emplace_back(seq, std::move(dm));
  }

  const std::uint64_t key = cfg.hash();
  std::vector<std::future<std::shared_ptr<const FitResult>>> fits;
  for (const auto &job : jobs) {
    fits.push_back(std::async(std::launch::async, [&cache, &cfg, &job, key] {
      return cache.get_or_fit(job.component, job.role, key, [&] {
        return fit_holding_phd(job.holdings, cfg.fit);
      });
    }));
  }
  std::vector<std::shared_ptr<const FitResult>> results;
  for (auto &f : fits) results.push_back(f.get());

  Draft d = Draft::from(model);
  for (const auto &[seq, dm] : delays) {
    StateSequence now;
    for (StateIndex s : seq) now.push_back(d.index(model.name(s)));
    check_sequence(d, now);
    if (dm.joint_delay > 0.0) d = joint_delay(d, now, dm);
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const StateIndex at = d.index(jobs[i].component);
    if (results[i]->degenerate())
      d = eliminate(d, at);  // pure delay, already accounted for
    else
      d = replace_with_phd(d, at, *results[i]->phd);
  }
  out.ctmc = d.build();
  out.provenance = d.origin;
  return out;
}

RefinedModel refine_for_property(const Ctmc &model, const UntilProperty &prop,
                                 const ObservationMap &observations,
                                 const RefinementConfig &cfg, FitCache &cache) {
  return refine_for_property(model, PropertyExpr::single(prop), observations, cfg, cache);
}

}  // namespace omni
