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

// omni: refine CTMC models from component timing logs and verify them.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "omni/classification.hpp"
#include "omni/error.hpp"
#include "omni/evaluation.hpp"
#include "omni/fitting.hpp"
#include "omni/model_io.hpp"
#include "omni/refinement.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace omni;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitSolver = 2;

// Rates of states without an inline rate come from the observations (n / sum).
Ctmc load_ctmc(const ModelSkeleton &skeleton, const std::optional<ConfigDoc> &cfg) {
  const auto missing = skeleton.deferred();
  if (missing.empty()) return skeleton.build();
  if (!cfg)
    fail_validation("component '" + missing.front() +
                    "' has no inline rate; pass --config with observations");
  std::map<std::string, double> rates;
  for (const auto &name : missing) {
    auto it = cfg->components.find(name);
    if (it == cfg->components.end())
      fail_validation("no observations configured for component '" + name + "'");
    rates[name] = estimate_component_stats(read_observations(it->second, name, cfg->unit)).rate;
  }
  return skeleton.bind(rates);
}

std::optional<ConfigDoc> maybe_config(const std::string &path) {
  if (path.empty()) return std::nullopt;
  return load_config(path);
}

std::map<std::string, double> constants_of(const std::optional<ConfigDoc> &cfg) {
  return cfg ? cfg->constants : std::map<std::string, double>{};
}

std::string names(const Ctmc &m, const StateSet &set) {
  std::string out;
  for (StateIndex s : set) out += (out.empty() ? "" : ", ") + m.name(s);
  return "{" + out + "}";
}

json phd_json(const FitResult &fit) {
  json j;
  j["distance"] = fit.distance;
  j["degenerate"] = fit.degenerate();
  j["branches"] = json::array();
  if (fit.phd) {
    j["mean"] = fit.phd->mean();
    j["phases"] = fit.phd->phase_count();
    for (const auto &b : fit.phd->branches())
      j["branches"].push_back({{"weight", b.weight}, {"phases", b.phases}, {"rate", b.rate}});
  }
  j["candidates"] = json::array();
  for (const auto &c : fit.candidates)
    j["candidates"].push_back({{"clusters", c.clusters}, {"distance", c.distance}});
  return j;
}

fs::path output_for(const fs::path &out, const std::string &name, std::size_t count) {
  if (count == 1) return out;
  fs::path p = out;
  p.replace_filename(out.stem().string() + "." + name + out.extension().string());
  return p;
}

const PropertyTemplate &pick_property(const std::vector<PropertyTemplate> &props,
                                      const std::string &name) {
  if (props.empty()) fail_validation("property file holds no properties");
  if (name.empty()) {
    if (props.size() > 1)
      fail_validation("property file holds several properties; choose one with --property");
    return props.front();
  }
  for (const auto &p : props)
    if (p.name == name) return p;
  fail_validation("no property named '" + name + "'");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Refine CTMC models with observed component timings and verify transient properties"};
  app.require_subcommand(1);

  std::string model_path, config_path, property_text, out_path, refined_path,
      property_file, results_path, traces_path, component, property_name;
  double tmax = 4.0, step = 0.05, at_t = 1.0;
  std::size_t count = 1000;
  std::uint64_t seed = 1;

  auto *classify_cmd = app.add_subcommand("classify", "partition the states for a property");
  classify_cmd->add_option("--model", model_path, "model file")->required();
  classify_cmd->add_option("--property", property_text, "property expression")->required();
  classify_cmd->add_option("--config", config_path, "config supplying rates and constants");
  classify_cmd->add_option("--json", out_path, "also write the partition as JSON");

  auto *fit_cmd = app.add_subcommand("fit", "fit hyper-Erlang holding-time distributions");
  fit_cmd->add_option("--config", config_path, "config file")->required();
  fit_cmd->add_option("--component", component, "only this component");
  fit_cmd->add_option("--out", out_path, "write fits as JSON");

  auto *refine_cmd = app.add_subcommand("refine", "build the refined model for a property");
  refine_cmd->add_option("--model", model_path, "model file")->required();
  refine_cmd->add_option("--config", config_path, "config file")->required();
  refine_cmd->add_option("--property", property_text, "property expression")->required();
  refine_cmd->add_option("--out", out_path, "refined model output")->required();

  auto *verify_cmd = app.add_subcommand("verify", "sweep properties over T");
  auto *m_opt = verify_cmd->add_option("--model", model_path, "high-level model file");
  auto *r_opt = verify_cmd->add_option("--refined", refined_path, "refined model file");
  m_opt->excludes(r_opt);
  verify_cmd->add_option("--config", config_path, "config supplying rates and constants");
  verify_cmd->add_option("--property-file", property_file, "properties, one per line")->required();
  verify_cmd->add_option("--tmax", tmax, "last grid point")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--step", step, "grid step")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--out", out_path, "results CSV")->required();

  auto *eval_cmd = app.add_subcommand("evaluate", "compare predictions with logged traces");
  eval_cmd->add_option("--results", results_path, "results CSV from verify")->required();
  eval_cmd->add_option("--traces", traces_path, "JSON Lines trace log")->required();
  eval_cmd->add_option("--model", model_path, "model whose labels name the trace states")->required();
  eval_cmd->add_option("--property-file", property_file, "properties")->required();
  eval_cmd->add_option("--property", property_name, "property name when the file has several");
  eval_cmd->add_option("--config", config_path, "config supplying rates and constants");
  eval_cmd->add_option("--out", out_path, "report JSON")->required();

  auto *sim_cmd = app.add_subcommand("simulate", "bootstrap traces from observations");
  sim_cmd->add_option("--model", model_path, "model file")->required();
  sim_cmd->add_option("--config", config_path, "config file")->required();
  sim_cmd->add_option("-n", count, "number of traces")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", seed, "rng seed");
  sim_cmd->add_option("--out", out_path, "JSON Lines output")->required();

  for (auto *cmd : {classify_cmd, refine_cmd})
    cmd->add_option("--at", at_t, "value substituted for T in the property");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    const auto cfg = maybe_config(config_path);

    if (*classify_cmd) {
      const auto skeleton = read_model(model_path, constants_of(cfg));
      // Only the jump structure matters for the partition.
      const Ctmc m = skeleton.deferred().empty() ? skeleton.build() : skeleton.jump_chain();
      const auto prop = parse_property(property_text).at(at_t);
      const StatePartition part = classify(m, prop);
      std::printf("S_X  %s\n", names(m, part.exclude).c_str());
      std::printf("S_O  %s\n", names(m, part.once_only).c_str());
      json j{{"exclude", json::array()}, {"once_only", json::array()}, {"together", json::array()}};
      for (StateIndex s : part.exclude) j["exclude"].push_back(m.name(s));
      for (StateIndex s : part.once_only) j["once_only"].push_back(m.name(s));
      for (const auto &seq : part.together) {
        std::string line;
        json js = json::array();
        for (StateIndex s : seq) {
          line += (line.empty() ? "" : " -> ") + m.name(s);
          js.push_back(m.name(s));
        }
        std::printf("T    %s\n", line.c_str());
        j["together"].push_back(js);
      }
      if (!out_path.empty()) write_text_file(out_path, j.dump(2) + "\n");
    } else if (*fit_cmd) {
      ObservationMap obs = load_observations(*cfg);
      if (!component.empty()) {
        auto it = obs.find(component);
        if (it == obs.end()) fail_validation("no observations for component '" + component + "'");
        obs = ObservationMap{{component, it->second}};
      }
      json all = json::object();
      for (const auto &[name, set] : obs) {
        const auto stats = estimate_component_stats(set);
        const FitResult fit = fit_holding_phd(stats.holdings, cfg->refinement.fit);
        json j = phd_json(fit);
        j["rate"] = stats.rate;
        j["delay"] = stats.delay;
        j["samples"] = set.durations.size();
        all[name] = j;
        std::printf("%-16s rate %.6g  delay %.6g  branches %zu  phases %zu  distance %.4g\n",
                    name.c_str(), stats.rate, stats.delay,
                    fit.phd ? fit.phd->branch_count() : 0,
                    fit.phd ? fit.phd->phase_count() : 0, fit.distance);
      }
      if (!out_path.empty()) write_text_file(out_path, all.dump(2) + "\n");
    } else if (*refine_cmd) {
      const auto skeleton = read_model(model_path, constants_of(cfg));
      const Ctmc high = load_ctmc(skeleton, cfg);
      const ObservationMap obs = load_observations(*cfg);
      FitCache cache;
      const RefinedModel refined = refine_for_property(
          high, parse_property(property_text).at(at_t), obs, cfg->refinement, cache);
      write_text_file(out_path, export_ctmc(refined.ctmc, refined.time_shift));
      std::printf("states %zu -> %zu, transitions %zu -> %zu, time shift %.6g, fits %zu\n",
                  high.size(), refined.ctmc.size(), high.transition_count(),
                  refined.ctmc.transition_count(), refined.time_shift, cache.fits());
    } else if (*verify_cmd) {
      if (model_path.empty() == refined_path.empty())
        fail_validation("verify needs exactly one of --model or --refined");
      const bool is_refined = !refined_path.empty();
      const auto skeleton = read_model(is_refined ? refined_path : model_path, constants_of(cfg));
      const Ctmc m = load_ctmc(skeleton, cfg);
      const auto props = parse_property_file(read_text_file(property_file));
      if (props.empty()) fail_validation("property file holds no properties");
      const auto grid = sweep_grid(tmax, step);
      for (const auto &p : props) {
        SweepResult r = evaluate_property_sweep(m, p, grid, skeleton.time_shift);
        r.refined = is_refined;
        const fs::path target = output_for(out_path, p.name, props.size());
        write_text_file(target, format_results_csv(r));
        std::printf("%s: %zu points -> %s\n", p.name.c_str(), grid.size(), target.c_str());
      }
    } else if (*eval_cmd) {
      const auto skeleton = read_model(model_path, constants_of(cfg));
      const Ctmc m = skeleton.deferred().empty() ? skeleton.build() : skeleton.jump_chain();
      const auto props = parse_property_file(read_text_file(property_file));
      const PropertyTemplate &prop = pick_property(props, property_name);
      const SweepResult predicted = parse_results_csv(read_text_file(results_path));
      const auto traces = read_traces(traces_path, m);
      if (traces.empty()) fail_validation("trace log is empty");
      const SweepResult actual = empirical_sweep(m, traces, prop, predicted.grid);
      const ErrorReport rep = error_area(actual, predicted);

      json j{{"property", prop.name},      {"expression", prop.text},
             {"traces", traces.size()},    {"error", rep.error},
             {"t_max", rep.t_max},         {"grid", predicted.grid},
             {"actual", actual.values},    {"predicted", predicted.values},
             {"differences", rep.differences}};
      const auto est = estimate_transition_probabilities(m, traces);
      json tp = json::object();
      for (StateIndex s = 0; s < m.size(); ++s) {
        if (m.is_absorbing(s)) continue;
        json row{{"departures", est.departures[s]}, {"undefined", bool(est.undefined[s])}};
        json to = json::object();
        for (const auto &[target, p] : est.probability[s]) to[m.name(target)] = p;
        row["to"] = to;
        tp[m.name(s)] = row;
      }
      j["transition_probabilities"] = tp;
      write_text_file(out_path, j.dump(2) + "\n");
      std::printf("%s: error area %.6g over [%g, %g] from %zu traces\n", prop.name.c_str(),
                  rep.error, predicted.grid.front(), rep.t_max, traces.size());
    } else if (*sim_cmd) {
      const auto skeleton = read_model(model_path, constants_of(cfg));
      const Ctmc structure = skeleton.deferred().empty() ? skeleton.build() : skeleton.jump_chain();
      const auto traces = bootstrap_traces(structure, load_observations(*cfg), count, seed);
      write_text_file(out_path, format_traces(structure, traces));
      std::printf("%zu traces -> %s\n", traces.size(), out_path.c_str());
    }
  } catch (const Error &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::Solver ? kExitSolver : kExitValidation;
  } catch (const std::exception &e) {
    // json parse failures, filesystem errors and the like are input problems
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return 0;
}
