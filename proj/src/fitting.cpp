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

#include "omni/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "omni/error.hpp"

namespace omni {

void ObservationSet::validate() const {
  if (durations.empty())
    fail_validation("component '" + component + "' has no observations");
  for (double d : durations)
    if (!std::isfinite(d) || d <= 0.0)
      fail_validation("component '" + component +
                      "' has a non-positive or non-finite duration");
}

ComponentStats estimate_component_stats(const ObservationSet &obs) {
  obs.validate();
  ComponentStats st;
  st.component = obs.component;
  st.unit = obs.unit;
  double sum = 0.0;
  for (double d : obs.durations) sum += d;
  st.rate = static_cast<double>(obs.durations.size()) / sum;
  st.delay = *std::min_element(obs.durations.begin(), obs.durations.end());
  st.holdings.reserve(obs.durations.size());
  for (double d : obs.durations) st.holdings.push_back(d - st.delay);
  return st;
}

HyperErlangPhd::HyperErlangPhd(std::vector<ErlangBranch> branches)
    : branches_(std::move(branches)) {
  if (branches_.empty()) fail_validation("hyper-Erlang PHD needs a branch");
  double total = 0.0;
  for (const auto &b : branches_) {
    if (!(b.weight > 0.0 && b.weight <= 1.0 + 1e-12))
      fail_validation("branch weight outside (0,1]");
    if (b.phases < 1) fail_validation("branch needs at least one phase");
    if (!(b.rate > 0.0) || !std::isfinite(b.rate))
      fail_validation("branch rate must be positive and finite");
    total += b.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    fail_validation("branch weights do not sum to 1");
  for (auto &b : branches_) b.weight /= total;
}

std::size_t HyperErlangPhd::phase_count() const {
  std::size_t n = 0;
  for (const auto &b : branches_) n += static_cast<std::size_t>(b.phases);
  return n;
}

double HyperErlangPhd::mean() const {
  double m = 0.0;
  for (const auto &b : branches_) m += b.weight * b.mean();
  return m;
}

double HyperErlangPhd::cdf(double x) const {
  double f = 0.0;
  for (const auto &b : branches_) f += b.weight * erlang_cdf(b.phases, b.rate, x);
  return std::min(1.0, f);
}

std::vector<double> HyperErlangPhd::initial_vector() const {
  std::vector<double> pi(phase_count(), 0.0);
  std::size_t at = 0;
  for (const auto &b : branches_) {
    pi[at] = b.weight;
    at += static_cast<std::size_t>(b.phases);
  }
  return pi;
}

std::vector<std::vector<double>> HyperErlangPhd::generator() const {
  const std::size_t n = phase_count();
  std::vector<std::vector<double>> d0(n, std::vector<double>(n, 0.0));
  std::size_t at = 0;
  for (const auto &b : branches_) {
    for (long j = 0; j < b.phases; ++j) {
      d0[at][at] = -b.rate;
      if (j + 1 < b.phases) d0[at][at + 1] = b.rate;
      ++at;
    }
  }
  return d0;
}

std::vector<double> HyperErlangPhd::exit_vector() const {
  std::vector<double> d1(phase_count(), 0.0);
  std::size_t at = 0;
  for (const auto &b : branches_) {
    at += static_cast<std::size_t>(b.phases);
    d1[at - 1] = b.rate;
  }
  return d1;
}

void FitConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    fail_validation("fit alpha must be >= 0");
  if (min_clusters < 1) fail_validation("min_clusters must be >= 1");
  if (max_clusters < min_clusters)
    fail_validation("max_clusters must be >= min_clusters");
  if (max_phases < 1) fail_validation("max_phases must be >= 1");
  if (max_steps < 0) fail_validation("max_steps must be >= 0");
  if (em_iterations < 0) fail_validation("em_iterations must be >= 0");
  if (!(em_tolerance >= 0.0)) fail_validation("em_tolerance must be >= 0");
}

std::uint64_t FitConfig::hash() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g|%d|%d|%ld|%d|%d|%.17g|%llu", alpha,
                min_clusters, max_clusters, max_phases, max_steps,
                em_iterations, em_tolerance,
                static_cast<unsigned long long>(seed));
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a, stable across runs
  for (const char *p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

struct Range {
  std::size_t begin, end;
};

// Lloyd iterations on sorted 1-D data; clusters stay contiguous.
std::vector<Range> kmeans_1d(const std::vector<double> &x, int c,
                             std::mt19937_64 &rng) {
  const std::size_t n = x.size();
  std::vector<double> centers(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) {
    auto idx = static_cast<std::size_t>((j + 0.5) * static_cast<double>(n) / c);
    centers[static_cast<std::size_t>(j)] = x[std::min(idx, n - 1)];
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> bounds, prev;
  for (int iter = 0; iter < 200; ++iter) {
    std::sort(centers.begin(), centers.end());
    // boundary j = first index assigned to a cluster > j
    bounds.assign(static_cast<std::size_t>(c), n);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
      while (j + 1 < centers.size() &&
             std::abs(x[i] - centers[j + 1]) < std::abs(x[i] - centers[j])) {
        bounds[j] = i;
        ++j;
      }
    }
    for (std::size_t k = j; k < bounds.size(); ++k) bounds[k] = n;
    if (bounds == prev) break;
    prev = bounds;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const std::size_t end = bounds[k];
      if (end > begin) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += x[i];
        centers[k] = s / static_cast<double>(end - begin);
      } else {
        centers[k] = x[pick(rng)];
      }
      begin = std::max(begin, end);
    }
  }
  std::vector<Range> out;
  std::size_t begin = 0;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    if (bounds[k] > begin) out.push_back({begin, bounds[k]});
    begin = std::max(begin, bounds[k]);
  }
  return out;
}

double log_erlang_density(long k, double mu, double x) {
  const double kd = static_cast<double>(k);
  return kd * std::log(mu) + (kd - 1.0) * std::log(x) - mu * x -
         std::lgamma(kd);
}

void em_refine(const std::vector<double> &x, std::vector<ErlangBranch> &br,
               const FitConfig &cfg, double mean_floor, double x_floor) {
  const std::size_t n = x.size(), c = br.size();
  std::vector<double> logp(c), resp_sum(c), resp_x(c);
  double last_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.em_iterations; ++it) {
    std::fill(resp_sum.begin(), resp_sum.end(), 0.0);
    std::fill(resp_x.begin(), resp_x.end(), 0.0);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = std::max(x[i], x_floor);
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < c; ++j) {
        logp[j] = std::log(br[j].weight) +
                  log_erlang_density(br[j].phases, br[j].rate, xi);
        top = std::max(top, logp[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) z += std::exp(logp[j] - top);
      ll += top + std::log(z);
      for (std::size_t j = 0; j < c; ++j) {
        const double r = std::exp(logp[j] - top) / z;
        resp_sum[j] += r;
        resp_x[j] += r * x[i];
      }
    }
    for (std::size_t j = 0; j < c; ++j) {
      br[j].weight = resp_sum[j] / static_cast<double>(n);
      if (resp_x[j] > 0.0) {
        const double m = std::max(resp_x[j] / resp_sum[j], mean_floor);
        br[j].rate = static_cast<double>(br[j].phases) / m;
      }
    }
    br.erase(std::remove_if(br.begin(), br.end(),
                            [](const ErlangBranch &b) { return b.weight < 1e-12; }),
             br.end());
    if (br.size() != c) {
      last_ll = -std::numeric_limits<double>::infinity();
      logp.resize(br.size());
      resp_sum.resize(br.size());
      resp_x.resize(br.size());
    }
    const double change = std::abs(ll - last_ll) / std::max(1.0, std::abs(ll));
    last_ll = ll;
    if (change < cfg.em_tolerance) break;
  }
  double total = 0.0;
  for (const auto &b : br) total += b.weight;
  for (auto &b : br) b.weight /= total;
}

double sample_mean(const std::vector<double> &x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

HyperErlangPhd fit_clusters(const std::vector<double> &sorted, int clusters,
                            const FitConfig &cfg) {
  const double overall = sample_mean(sorted);
  if (!(overall > 0.0)) fail_validation("degenerate holding sample");
  // keeps branch rates (and uniformization rates downstream) bounded
  const double mean_floor = 0.01 * overall;
  std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(clusters));
  auto ranges = kmeans_1d(sorted, clusters, rng);
  // an all-zero cluster has no Erlang match; fold it into its neighbour
  while (ranges.size() > 1 && sorted[ranges[0].end - 1] == 0.0) {
    ranges[1].begin = ranges[0].begin;
    ranges.erase(ranges.begin());
  }
  const double n = static_cast<double>(sorted.size());
  std::vector<ErlangBranch> br;
  for (const auto &r : ranges) {
    const double cnt = static_cast<double>(r.end - r.begin);
    double m = 0.0;
    for (std::size_t i = r.begin; i < r.end; ++i) m += sorted[i];
    m /= cnt;
    double v = 0.0;
    for (std::size_t i = r.begin; i < r.end; ++i)
      v += (sorted[i] - m) * (sorted[i] - m);
    v /= cnt;
    long k = cfg.max_phases;
    if (v > 0.0) {
      const double ratio = std::round(m * m / v);
      k = ratio >= static_cast<double>(cfg.max_phases)
              ? cfg.max_phases
              : std::max(1L, static_cast<long>(ratio));
    }
    m = std::max(m, mean_floor);
    br.push_back({cnt / n, k, static_cast<double>(k) / m});
  }
  if (cfg.em_iterations > 0 && br.size() > 0)
    em_refine(sorted, br, cfg, mean_floor, 1e-9 * overall);
  return HyperErlangPhd(std::move(br));
}

double cdf_distance(const std::vector<double> &sorted, const HyperErlangPhd &phd) {
  if (sorted.empty()) fail_validation("cdf_distance needs a nonempty sample");
  const double n = static_cast<double>(sorted.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double emp = (static_cast<double>(i) + 0.5) / n;
    acc += std::abs(emp - phd.cdf(sorted[i]));
  }
  return acc / n;
}

FitResult fit_holding_phd(const std::vector<double> &holdings,
                          const FitConfig &cfg) {
  cfg.validate();
  if (holdings.empty()) fail_validation("empty holding sample");
  for (double h : holdings)
    if (!std::isfinite(h) || h < 0.0)
      fail_validation("holding times must be finite and non-negative");
  std::vector<double> sample = holdings;
  std::sort(sample.begin(), sample.end());
  FitResult res;
  if (sample.back() == 0.0) return res;

  std::size_t distinct = 1;
  for (std::size_t i = 1; i < sample.size(); ++i)
    if (sample[i] != sample[i - 1]) ++distinct;
  if (distinct == 1) {
    const double v = sample.front();
    const double mu = static_cast<double>(cfg.max_phases) / v;
    res.phd = HyperErlangPhd({{1.0, cfg.max_phases, mu}});
    res.distance = cdf_distance(sample, *res.phd);
    res.candidates.push_back({1, res.distance});
    return res;
  }

  double min_err = std::numeric_limits<double>::infinity();
  double improvement = 0.0;
  int steps = 0;
  int c = cfg.min_clusters;
  while (c <= cfg.max_clusters && steps <= cfg.max_steps) {
    if (static_cast<std::size_t>(c) > distinct) break;
    HyperErlangPhd phd = fit_clusters(sample, c, cfg);
    const double err = cdf_distance(sample, phd);
    res.candidates.push_back({c, err});
    if (err < min_err) {
      res.phd = std::move(phd);
      // the first accepted candidate contributes nothing
      if (std::isfinite(min_err)) improvement += min_err - err;
      min_err = err;
    }
    if (improvement >= cfg.alpha) {
      improvement = 0.0;
      steps = 0;
    } else {
      ++steps;
    }
    ++c;
  }
  if (!res.phd) {
    // MinC exceeded the number of distinct values
    res.phd = fit_clusters(sample, static_cast<int>(distinct), cfg);
    min_err = cdf_distance(sample, *res.phd);
    res.candidates.push_back({static_cast<int>(distinct), min_err});
  }
  res.distance = min_err;
  return res;
}

std::vector<std::vector<double>> correlation_matrix(
    const std::vector<std::vector<double>> &series) {
  if (series.empty()) fail_validation("no series to correlate");
  const std::size_t n = series.front().size();
  if (n < 2) fail_validation("correlation needs at least two points per series");
  for (const auto &s : series)
    if (s.size() != n) fail_validation("correlated series must be paired");
  const std::size_t m = series.size();
  std::vector<std::vector<double>> centered(m, std::vector<double>(n));
  std::vector<double> norm(m);
  for (std::size_t a = 0; a < m; ++a) {
    const double mu = sample_mean(series[a]);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      centered[a][i] = series[a][i] - mu;
      ss += centered[a][i] * centered[a][i];
    }
    if (!(ss > 0.0)) fail_validation("undefined correlation: zero-variance series");
    norm[a] = std::sqrt(ss);
  }
  std::vector<std::vector<double>> r(m, std::vector<double>(m, 1.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += centered[a][i] * centered[b][i];
      r[a][b] = r[b][a] = std::clamp(s / (norm[a] * norm[b]), -1.0, 1.0);
    }
  return r;
}

}  // namespace omni
