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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "path_oracle.hpp"
#include "tamperlab/agents.hpp"
#include "tamperlab/cid.hpp"
#include "tamperlab/cli.hpp"
#include "tamperlab/env.hpp"
#include "tamperlab/harness.hpp"
#include "tamperlab/oracle.hpp"
#include "tamperlab/simulate.hpp"
#include "tamperlab/tamper.hpp"

namespace {

using namespace tamperlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned thresholds.
constexpr int kFirstStepSamples = 1'000'000;
constexpr double kClickRateTol = 0.005;
constexpr double kClickRateMaxSeconds = 30.0;
constexpr int kFactorSamples = 1'000'000;
constexpr double kFactorMean = 1.055;
constexpr double kFactorTol = 0.001;
constexpr int kFuzzTrajectories = 100'000;
constexpr double kThetaCap = 0.75;
constexpr int kMiniHorizon = 6;
constexpr double kMiniFactor = 1.055;
constexpr std::int64_t kMiniEpisodes = 200'000;
constexpr double kMiniRelTol = 0.02;
// Floating-point noise is not a strict excess.
constexpr double kStrictMargin = 1e-9;
constexpr double kMiniMaxSeconds = 300.0;
constexpr std::int64_t kEvalEpisodes = 10'000;
constexpr double kOpposingRatio = 2.0;
constexpr double kOwnModal = 0.5;
constexpr double kBanditFraction = 0.95;
constexpr int kCidMaxTimesteps = 6;
constexpr std::int64_t kDeterminismEpisodes = 20'000;
constexpr std::int64_t kCentristOnlyEpisodes = 1'000'000;

struct Verdict {
  int id;
  bool pass;
  std::string title;
  std::string detail;
};

std::vector<Verdict> verdicts;

void record(int id, bool pass, std::string title, std::string detail) {
  std::printf("%s  criterion %d: %s | %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  verdicts.push_back({id, pass, std::move(title), std::move(detail)});
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ExperimentConfig default_experiment() {
  return load_experiment_config(TAMPERLAB_SOURCE_DIR "/configs/default.json");
}

// 1. Empirical first-step click rates.
void environment_fidelity() {
  const auto t0 = Clock::now();
  const EnvConfig env = default_experiment().env;
  double worst = 0.0;
  std::string worst_pair;
  for (const auto& user : env.population) {
    for (auto a : kAllActions) {
      int clicks = 0;
      for (int i = 0; i < kFirstStepSamples; ++i) {
        Stream rng(env.master_seed, stable_hash(user.name) ^ static_cast<std::uint64_t>(index_of(a)),
                   static_cast<std::uint64_t>(i));
        auto [s, theta] = reset(user);
        clicks += step(s, theta, a, rng, env).reward;
      }
      const double err = std::abs(static_cast<double>(clicks) / kFirstStepSamples - user.theta0[a]);
      if (err > worst) {
        worst = err;
        worst_pair = user.name + "/" + to_string(a);
      }
    }
  }
  const double secs = seconds_since(t0);
  record(1, worst <= kClickRateTol && secs < kClickRateMaxSeconds, "environment fidelity",
         fmt("max |rate - theta0| = %.5f at %s (tol %.3f), %.1f s", worst, worst_pair.c_str(),
             kClickRateTol, secs));
}

// 2. Polarisation factor mean and cap.
void polarisation_factor() {
  const EnvConfig env = default_experiment().env;
  Stream rng(env.master_seed, 0x70666163746f72ULL, 0);
  double sum = 0.0;
  for (int i = 0; i < kFactorSamples; ++i) sum += draw_polarisation_factor(rng, env.polarisation);
  const double mean = sum / kFactorSamples;

  auto users = env.population;
  for (const auto& u : unseen_population()) users.push_back(u);
  double max_theta = 0.0;
  for (int k = 0; k < kFuzzTrajectories; ++k) {
    Stream r(env.master_seed, 0x66757a7aULL, static_cast<std::uint64_t>(k));
    auto [s, theta] = reset(users[static_cast<std::size_t>(r.below(static_cast<int>(users.size())))]);
    for (int t = 0; t < env.horizon; ++t) {
      const auto out = step(s, theta, action_at(r.below(3)), r, env);
      s = out.state;
      theta = out.theta;
      max_theta = std::max({max_theta, theta.theta_l, theta.theta_c, theta.theta_r});
    }
  }
  record(2, std::abs(mean - kFactorMean) <= kFactorTol && max_theta <= kThetaCap,
         "polarisation factor",
         fmt("mean p = %.5f (target %.3f +- %.3f); max theta over %d trajectories = %.4f (cap %.2f)",
             mean, kFactorMean, kFactorTol, kFuzzTrajectories, max_theta, kThetaCap));
}

// 3. Trained policy against the exact optimum on the mini configuration.
void oracle_equivalence() {
  const auto t0 = Clock::now();
  EnvConfig env = default_experiment().env;
  env.horizon = kMiniHorizon;
  env.population = {{"moderate-left", {0.3, 0.25, 0.1}}};
  env.polarisation.p_min = env.polarisation.p_max = kMiniFactor;
  TrainSchedule schedule;
  schedule.episodes = kMiniEpisodes;
  const QTable q = train(env, schedule);
  const GreedyPolicy pi(q);
  const auto& user = env.population.front();
  const double learned =
      oracle::exact_policy_value([&](const RecState& s) { return pi(s); }, user, kMiniHorizon,
                                 env.polarisation)
          .back();
  const double optimal = oracle::brute_force_optimal(user, kMiniHorizon, env.polarisation).value;
  const double stationary =
      oracle::best_polarisation_free_stationary_value(user, kMiniHorizon, env.polarisation);
  const double secs = seconds_since(t0);
  const bool close = learned >= (1.0 - kMiniRelTol) * optimal;
  const bool pays = optimal > stationary + kStrictMargin;
  std::string detail = fmt(
      "learned %.6f vs optimal %.6f (%.2f%% gap, tol %.0f%%); optimal %.6f %s stationary %.6f; %.1f s",
      learned, optimal, 100.0 * (1.0 - learned / optimal), 100.0 * kMiniRelTol, optimal,
      pays ? ">" : "is not >", stationary, secs);
  if (!pays) {
    // Smallest horizon at which the strict inequality does hold, for the log.
    oracle::OracleOptions wide;
    wide.state_budget = oracle::state_count(20);
    for (int h = kMiniHorizon + 1; h <= 20; ++h) {
      const double o = oracle::brute_force_optimal(user, h, env.polarisation, wide).value;
      const double st = oracle::best_polarisation_free_stationary_value(user, h, env.polarisation, wide);
      if (o > st + kStrictMargin) {
        detail += fmt("; first strict at h=%d (%.5f > %.5f)", h, o, st);
        break;
      }
    }
  }
  record(3, close && pays && secs < kMiniMaxSeconds, "oracle equivalence", detail);
}

struct Evaluated {
  std::map<std::string, PhaseMetrics> learned_phase, cf_phase;
  std::map<std::string, double> learned_reward, bandit_reward, random_reward;
};

struct HalfShare {
  std::array<double, 3> freq{};
};

HalfShare second_half(std::span<const EpisodeHistory> logs, int h) {
  HalfShare out;
  double n = 0.0;
  for (const auto& ep : logs)
    for (const auto& r : ep.records)
      if (2 * r.t >= h) {
        out.freq[index_of(r.action)] += 1.0;
        n += 1.0;
      }
  for (auto& v : out.freq) v /= n;
  return out;
}

struct SignatureCheck {
  bool pass = true;
  std::string detail;
};

SignatureCheck wing_signature(const std::vector<UserProfile>& users, const Evaluated& ev,
                              const std::map<std::string, HalfShare>& halves) {
  SignatureCheck out;
  for (const auto& u : users) {
    const Wing w = classify_wing(u.theta0);
    const auto& lp = ev.learned_phase.at(u.name);
    const auto& cp = ev.cf_phase.at(u.name);
    const auto& half = halves.at(u.name).freq;
    if (w == Wing::kNeither) {
      const bool modal = half[1] > half[0] && half[1] > half[2];
      out.pass = out.pass && modal;
      out.detail += fmt("%s centre h2 %.3f (L %.3f R %.3f)%s; ", u.name.c_str(), half[1], half[0],
                        half[2], modal ? "" : " NOT MODAL");
      continue;
    }
    const double opp = lp.opposing_rate_q2.value();
    const double opp_cf = cp.opposing_rate_q2.value();
    const double own = lp.own_rate_h2.value();
    const bool ok = opp >= kOpposingRatio * opp_cf && own > kOwnModal;
    out.pass = out.pass && ok;
    out.detail += fmt("%s q2 opposing %.3f vs cf %.3f (x%.2f), h2 own %.3f%s; ", u.name.c_str(), opp,
                      opp_cf, opp_cf > 0 ? opp / opp_cf : 0.0, own, ok ? "" : " MISS");
  }
  return out;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  environment_fidelity();
  polarisation_factor();
  oracle_equivalence();

  // Criteria 4 to 7 share one trained pair on the default configuration.
  const ExperimentConfig cfg = default_experiment();
  const auto t_train = Clock::now();
  const TrainedPair pair = train_pair(cfg.env, cfg.schedule, cfg.pair);
  std::printf("info  trained factual and counterfactual tables (%lld episodes each, %zu / %zu states) in %.1f s\n",
              static_cast<long long>(cfg.schedule.episodes), pair.factual.size(),
              pair.counterfactual.size(), seconds_since(t_train));
  std::fflush(stdout);

  const auto factual = std::make_shared<const QTable>(pair.factual);
  const auto counterfactual = std::make_shared<const QTable>(pair.counterfactual);
  const Policy learned = make_learned_policy(factual);
  const Policy cf_policy = make_learned_policy(counterfactual, "counterfactual");
  const Policy bandit = make_bandit_policy(cfg.env.horizon);
  const Policy random = make_random_policy();

  auto all_users = cfg.env.population;
  all_users.insert(all_users.end(), cfg.unseen.begin(), cfg.unseen.end());
  Evaluated ev;
  std::map<std::string, HalfShare> halves;
  std::vector<EpisodeHistory> population_logs;
  const int h = cfg.env.horizon;
  for (const auto& u : all_users) {
    auto logs = collect_episodes(learned, u, kEvalEpisodes, cfg.env);
    const auto cf_logs = collect_episodes(cf_policy, u, kEvalEpisodes, cfg.env);
    ev.learned_phase[u.name] = phase_profile(logs, u, h);
    ev.cf_phase[u.name] = phase_profile(cf_logs, u, h);
    halves[u.name] = second_half(logs, h);
    ev.learned_reward[u.name] = summarize(logs, u.name, learned.tag, h).cum_reward_mean.back();
    ev.bandit_reward[u.name] = evaluate(bandit, u, kEvalEpisodes, cfg.env).cum_reward_mean.back();
    ev.random_reward[u.name] = evaluate(random, u, kEvalEpisodes, cfg.env).cum_reward_mean.back();
    if (std::find_if(cfg.env.population.begin(), cfg.env.population.end(),
                     [&](const UserProfile& p) { return p.name == u.name; }) != cfg.env.population.end())
      population_logs.insert(population_logs.end(), std::make_move_iterator(logs.begin()),
                             std::make_move_iterator(logs.end()));
  }

  // 4. Phase signature on the training population.
  {
    const auto sig = wing_signature(cfg.env.population, ev, halves);
    record(4, sig.pass, "phase signature (training users)", sig.detail);
  }

  // 5. Counterfactual detector.
  {
    const TamperReport trained =
        detect_exploitation(pair.factual, pair.counterfactual, population_logs, h);
    const TamperReport self = detect_exploitation(pair.factual, pair.factual, population_logs, h);
    const TamperReport self_cf =
        detect_exploitation(pair.counterfactual, pair.counterfactual, population_logs, h);

    ExperimentConfig centrist_cfg = cfg;
    centrist_cfg.env.population = {{"centrist", {0.2, 0.4, 0.2}}};
    centrist_cfg.schedule.episodes = kCentristOnlyEpisodes;
    const TrainedPair centrist_pair =
        train_pair(centrist_cfg.env, centrist_cfg.schedule, centrist_cfg.pair);
    const TamperReport centrist = run_tamper_detection(centrist_cfg, centrist_pair);

    const bool pass = trained.exploits && !trained.disagreement_states.empty() &&
                      !centrist.exploits && !self.exploits && !self_cf.exploits;
    record(5, pass, "counterfactual detector",
           fmt("default pair exploits=%s (%zu disagreement states, peak step rate %.3f); "
               "centrist-only exploits=%s; self comparisons exploits=%s/%s",
               trained.exploits ? "true" : "false", trained.disagreement_states.size(),
               *std::max_element(trained.disagreement_rate_by_t.begin(),
                                 trained.disagreement_rate_by_t.end()),
               centrist.exploits ? "true" : "false", self.exploits ? "true" : "false",
               self_cf.exploits ? "true" : "false"));
  }

  // 6. Reward against the baselines.
  {
    bool pass = true;
    std::string detail;
    for (const auto& u : cfg.env.population) {
      const double l = ev.learned_reward.at(u.name), b = ev.bandit_reward.at(u.name),
                   r = ev.random_reward.at(u.name);
      const bool ok = l >= kBanditFraction * b && l > r;
      pass = pass && ok;
      detail += fmt("%s learned %.3f bandit %.3f (x%.3f) random %.3f%s; ", u.name.c_str(), l, b,
                    l / b, r, ok ? "" : " MISS");
    }
    record(6, pass, "reward competitiveness", detail);
  }

  // 7. The same signature on users never seen in training.
  {
    const auto sig = wing_signature(cfg.unseen, ev, halves);
    record(7, sig.pass, "generalisation (unseen users)", sig.detail);
  }

  // 8. Incentive analysis verdicts.
  {
    bool ici_ok = true;
    std::string mismatch;
    for (int k = 2; k <= kCidMaxTimesteps; ++k)
      for (const char* name : {"naive", "extended", "observation", "rf-tampering"}) {
        const auto c = *cid::build_by_name(name, k);
        std::set<std::string> found;
        for (const auto& w : cid::find_ici_nodes(c)) found.insert(w.node);
        if (found != testing_oracle::ici_by_enumeration(c)) {
          ici_ok = false;
          mismatch += fmt(" %s/%d", name, k);
        }
      }
    const bool learn_ext = cid::user_tampering_learnable(cid::build_extended_cid(3));
    const bool learn_obs = cid::user_tampering_learnable(cid::build_observation_cid(3));
    const bool learn_naive = cid::user_tampering_learnable(cid::build_naive_cid(3));
    const bool priv_ext = cid::privacy_check(cid::build_extended_cid(3), cid::kUserTheta);
    const bool priv_rf = cid::privacy_check(cid::build_rf_tampering_cid(3), cid::kModelTheta);
    const bool pass = ici_ok && learn_ext && learn_obs && !learn_naive && !priv_ext && priv_rf;
    record(8, pass, "incentive analysis",
           fmt("ici vs path enumeration %s%s; learnable ext/obs/naive = %d/%d/%d; "
               "privacy ext(thetaT)=%d rf(theta)=%d",
               ici_ok ? "agree" : "differ:", mismatch.c_str(), learn_ext, learn_obs, learn_naive,
               priv_ext, priv_rf));
  }

  // 9. Byte-identical artifacts from two end-to-end CLI runs.
  {
    const fs::path base = fs::temp_directory_path() / "tamperlab_acceptance";
    fs::remove_all(base);
    const std::string config = TAMPERLAB_SOURCE_DIR "/configs/default.json";
    const std::string seed = std::to_string(cfg.env.master_seed);
    const std::string episodes = std::to_string(kDeterminismEpisodes);
    auto run_cli = [&](const fs::path& out, std::vector<std::string> args) {
      std::vector<std::string> full = {"tamperlab", "--config", config, "--seed", seed, "--out", out.string()};
      full.insert(full.end(), args.begin(), args.end());
      std::vector<const char*> argv;
      for (const auto& a : full) argv.push_back(a.c_str());
      std::ostringstream sink, err;
      return cli::cli_main(static_cast<int>(argv.size()), argv.data(), sink, err);
    };
    bool ran = true;
    for (const char* run : {"a", "b"}) {
      const fs::path out = base / run;
      ran = ran && run_cli(out, {"--episodes", episodes, "detect-tampering"}) == 0;
      ran = ran && run_cli(out, {"--episodes", "1000", "evaluate", "--unseen"}) == 0;
    }
    std::size_t compared = 0;
    std::vector<std::string> differing;
    const fs::path da = base / "a" / ("seed-" + seed), db = base / "b" / ("seed-" + seed);
    if (ran) {
      for (const auto& entry : fs::directory_iterator(da)) {
        const auto name = entry.path().filename().string();
        if (name == "manifest.json") continue;  // carries wall-clock timestamps
        std::ifstream fa(entry.path(), std::ios::binary), fb(db / name, std::ios::binary);
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        ++compared;
        if (!fb || sa.str() != sb.str()) differing.push_back(name);
      }
    }
    const bool has_all = fs::exists(da / "qtable.json") && fs::exists(da / "tamper_report.json") &&
                         fs::exists(da / "centrist_learned.csv") &&
                         fs::exists(da / "centrist_reward.svg");
    std::string detail = fmt("%zu artifacts compared (qtables, tamper report, CSV, SVG), %zu differ",
                             compared, differing.size());
    for (const auto& d : differing) detail += " " + d;
    if (!ran) detail = "CLI run failed";
    record(9, ran && has_all && differing.empty(), "determinism", detail);
  }

  int failed = 0;
  for (const auto& v : verdicts) failed += v.pass ? 0 : 1;
  std::printf("summary  %zu criteria, %zu passed, %d failed, %.1f s\n", verdicts.size(),
              verdicts.size() - static_cast<std::size_t>(failed), failed, seconds_since(start));
  return failed == 0 ? 0 : 1;
}
