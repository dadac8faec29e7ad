// Copyright 2026 The tamperlab Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
// error.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tamperlab/agents.hpp"
#include "tamperlab/cid.hpp"
#include "tamperlab/harness.hpp"
#include "tamperlab/oracle.hpp"
#include "tamperlab/tamper.hpp"

namespace tamperlab::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kRuntimeError = 2;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::int64_t> episodes;
};

inline ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig cfg =
      g.config_path.empty() ? ExperimentConfig{} : load_experiment_config(g.config_path);
  if (g.seed) cfg.env.master_seed = *g.seed;
  return cfg;
}

/// <out>/seed-<seed>, with TAMPERLAB_OUT taking precedence over --out.
inline std::filesystem::path run_dir(const GlobalOptions& g, const ExperimentConfig& cfg) {
  std::filesystem::path base = g.out;
  if (const char* env = std::getenv("TAMPERLAB_OUT"); env != nullptr && *env != '\0') base = env;
  auto dir = base / ("seed-" + std::to_string(cfg.env.master_seed));
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                           const std::string& started, std::vector<std::string> outputs) {
  RunManifest m;
  m.config = cfg;
  m.master_seed = cfg.env.master_seed;
  m.started_at = started;
  m.finished_at = utc_timestamp();
  m.outputs = std::move(outputs);
  write_file(dir / "manifest.json", nlohmann::json(m).dump(2) + "\n");
}

inline void save_qtable(const std::filesystem::path& path, const QTable& q) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_qtable(os, q);
  if (!os) throw IoError("failed writing " + path.string());
}

inline QTable load_qtable(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read qtable " + path.string());
  try {
    return qtable_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad qtable " + path.string() + ": " + e.what());
  }
}

inline int cmd_train(const GlobalOptions& g, std::ostream& out) {
  const std::string started = utc_timestamp();
  ExperimentConfig cfg = resolve_config(g);
  if (g.episodes) cfg.schedule.episodes = *g.episodes;
  cfg.schedule.check();
  const auto dir = run_dir(g, cfg);
  const QTable q = train(cfg.env, cfg.schedule);
  save_qtable(dir / "qtable.json", q);
  write_manifest(dir, cfg, started, {"qtable.json"});
  out << "trained " << cfg.schedule.episodes << " episodes, " << q.size() << " states -> "
      << (dir / "qtable.json").string() << "\n";
  return kOk;
}

inline int cmd_evaluate(const GlobalOptions& g, const std::string& qtable_path, bool unseen,
                        std::ostream& out) {
  const std::string started = utc_timestamp();
  ExperimentConfig cfg = resolve_config(g);
  if (g.episodes) cfg.eval_episodes = *g.episodes;
  if (cfg.eval_episodes < 1) throw UsageError("--episodes must be positive for evaluate");
  const auto dir = run_dir(g, cfg);
  const auto q = std::make_shared<const QTable>(
      load_qtable(qtable_path.empty() ? dir / "qtable.json" : std::filesystem::path(qtable_path)));
  std::vector<UserProfile> profiles = cfg.env.population;
  if (unseen) profiles.insert(profiles.end(), cfg.unseen.begin(), cfg.unseen.end());
  const std::vector<Policy> policies = {make_learned_policy(q), make_random_policy(),
                                        make_bandit_policy(cfg.env.horizon)};
  const Comparison cmp = compare(profiles, policies, cfg.eval_episodes, cfg.env);
  std::vector<std::string> outputs;
  for (const auto& r : cmp.results) {
    const std::string name = slug(r.profile) + "_" + r.policy + ".csv";
    emit_csv(r, dir / name);
    outputs.push_back(name);
  }
  for (const auto& p : emit_svg_charts(cmp.results, (dir / "").string()))
    outputs.push_back(p.filename().string());
  write_manifest(dir, cfg, started, outputs);
  out << cmp.summary();
  out << "wrote " << outputs.size() << " files to " << dir.string() << "\n";
  return kOk;
}

inline int cmd_detect(const GlobalOptions& g, std::ostream& out) {
  const std::string started = utc_timestamp();
  ExperimentConfig cfg = resolve_config(g);
  if (g.episodes) cfg.schedule.episodes = *g.episodes;
  cfg.schedule.check();
  const auto dir = run_dir(g, cfg);
  const TrainedPair pair = train_pair(cfg.env, cfg.schedule, cfg.pair);
  const TamperReport report = run_tamper_detection(cfg, pair);
  save_qtable(dir / "qtable.json", pair.factual);
  save_qtable(dir / "qtable_counterfactual.json", pair.counterfactual);
  write_file(dir / "tamper_report.json", nlohmann::json(report).dump(2) + "\n");
  write_manifest(dir, cfg, started,
                 {"qtable.json", "qtable_counterfactual.json", "tamper_report.json"});
  out << "exploits: " << (report.exploits ? "true" : "false") << " ("
      << report.disagreement_states.size() << " disagreement states)\n"
      << "report: " << (dir / "tamper_report.json").string() << "\n";
  return kOk;
}

inline std::optional<UserProfile> find_profile(const std::string& name) {
  auto all = default_population();
  for (auto& u : unseen_population()) all.push_back(u);
  for (auto& u : all)
    if (u.name == name) return u;
  return std::nullopt;
}

struct OracleArgs {
  int horizon = 6;
  double p = 1.055;
  std::string profile = "moderate-left";
  std::vector<double> theta;
  std::size_t budget = 3003;
  bool dump_states = false;
};

inline int cmd_oracle(const GlobalOptions& g, const OracleArgs& a, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(g);
  UserProfile user;
  if (!a.theta.empty()) {
    if (a.theta.size() != 3) throw UsageError("--theta takes three values l,c,r");
    user = {"custom", {a.theta[0], a.theta[1], a.theta[2]}};
  } else if (auto found = find_profile(a.profile)) {
    user = *found;
  } else {
    throw UsageError("unknown profile '" + a.profile + "'");
  }
  PolarisationConfig pol = cfg.env.polarisation;
  pol.p_min = pol.p_max = a.p;
  pol.enabled = true;
  pol.check();
  oracle::OracleOptions opts;
  opts.state_budget = a.budget;
  const auto sol = oracle::brute_force_optimal(user, a.horizon, pol, opts);
  const double stationary =
      oracle::best_polarisation_free_stationary_value(user, a.horizon, pol, opts);
  out << "profile " << user.name << " theta0 (" << user.theta0.theta_l << ", "
      << user.theta0.theta_c << ", " << user.theta0.theta_r << ") h=" << a.horizon
      << " p=" << a.p << "\n"
      << "optimal value " << format_number(sol.value) << "\n"
      << "best polarisation-free stationary value " << format_number(stationary) << "\n"
      << "gap " << format_number(oracle::policy_value_counterfactual_gap(
                       [&](const RecState& s) { return sol(s); }, user, a.horizon, pol, opts))
      << "\n";
  if (a.dump_states) {
    std::vector<std::pair<RecState, SourceAction>> rows;
    for (const auto& [k, act] : sol.actions) rows.emplace_back(RecState::unpack(k), act);
    std::sort(rows.begin(), rows.end());
    for (const auto& [s, act] : rows) {
      const auto st = s.as_array();
      out << "state";
      for (int v : st) out << ' ' << v;
      out << " action " << to_string(act) << " value " << format_number(sol.value_at(s)) << "\n";
    }
  }
  return kOk;
}

inline int cmd_cid(const std::string& builder, int timesteps, bool show_dump, std::ostream& out) {
  auto diagram = cid::build_by_name(builder, timesteps);
  if (!diagram) throw UsageError("unknown diagram '" + builder + "'");
  if (show_dump) out << cid::dump(*diagram);
  for (const auto& w : cid::find_ici_nodes(*diagram)) {
    out << "ici " << w.node << " via";
    for (std::size_t i = 0; i < w.paths.front().size(); ++i)
      out << (i ? " -> " : " ") << w.paths.front()[i];
    out << "\n";
  }
  out << "user tampering: "
      << (cid::user_tampering_learnable(*diagram) ? "LEARNABLE" : "NOT LEARNABLE") << "\n";
  for (auto family : {cid::kUserTheta, cid::kModelTheta})
    out << "privacy(" << family << "): "
        << (cid::privacy_check(*diagram, family) ? "holds" : "violated") << "\n";
  return kOk;
}

/// Entry point shared by the binary and the tests.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"tamperlab: user-tampering simulation laboratory"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "experiment config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output base directory");
  app.add_option("--episodes", g.episodes,
                 "training episodes (train, detect-tampering) or evaluation episodes (evaluate)");

  auto* train_cmd = app.add_subcommand("train", "train a Q-table from a config");
  train_cmd->fallthrough();

  std::string qtable_path;
  bool unseen = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a Q-table against the baselines");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--qtable", qtable_path, "Q-table JSON (default <run dir>/qtable.json)");
  eval_cmd->add_flag("--unseen", unseen, "also evaluate the unseen population");

  auto* detect_cmd = app.add_subcommand("detect-tampering", "counterfactual exploitation test");
  detect_cmd->fallthrough();

  OracleArgs oargs;
  auto* oracle_cmd = app.add_subcommand("oracle", "exact optimum for one user, deterministic p");
  oracle_cmd->fallthrough();
  oracle_cmd->add_option("--horizon", oargs.horizon)->check(CLI::Range(1, kMaxHorizon));
  oracle_cmd->add_option("--p", oargs.p, "polarisation factor");
  oracle_cmd->add_option("--profile", oargs.profile);
  oracle_cmd->add_option("--theta", oargs.theta, "custom theta0 l c r")->delimiter(',');
  oracle_cmd->add_option("--budget", oargs.budget, "state budget");
  oracle_cmd->add_flag("--dump-states", oargs.dump_states);

  std::string builder;
  int timesteps = 3;
  bool no_dump = false;
  auto* cid_cmd = app.add_subcommand("cid", "incentive analysis of a causal influence diagram");
  cid_cmd->fallthrough();
  cid_cmd->add_option("builder", builder, "naive | extended | observation | rf-tampering")
      ->required();
  cid_cmd->add_option("--timesteps", timesteps)->check(CLI::Range(2, 1000));
  cid_cmd->add_flag("--no-dump", no_dump, "omit the node/edge listing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  try {
    if (*train_cmd) return cmd_train(g, out);
    if (*eval_cmd) return cmd_evaluate(g, qtable_path, unseen, out);
    if (*detect_cmd) return cmd_detect(g, out);
    if (*oracle_cmd) return cmd_oracle(g, oargs, out);
    if (*cid_cmd) return cmd_cid(builder, timesteps, !no_dump, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace tamperlab::cli
