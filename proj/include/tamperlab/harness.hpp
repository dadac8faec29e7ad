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

// Experiment orchestration: evaluation of frozen policies, baseline
// comparison, and CSV / SVG / JSON artifacts.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tamperlab/agents.hpp"
#include "tamperlab/env.hpp"
#include "tamperlab/simulate.hpp"
#include "tamperlab/tamper.hpp"

namespace tamperlab {

inline constexpr const char* kVersion = "0.1.0";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalResult {
  std::string profile;
  std::string policy;  // learned | random | bandit | ...
  std::int64_t episodes = 0;
  std::vector<std::array<double, 3>> action_freq;  // h rows
  std::vector<double> cum_reward_mean;
  std::vector<double> cum_reward_ci95;  // normal-approximation half-widths
};

/// Aggregates evaluation logs in episode order, so the floating-point
/// reduction is independent of how the episodes were scheduled.
inline EvalResult summarize(std::span<const EpisodeHistory> logs, const std::string& profile,
                            const std::string& tag, int h) {
  EvalResult r;
  r.profile = profile;
  r.policy = tag;
  r.episodes = static_cast<std::int64_t>(logs.size());
  const auto H = static_cast<std::size_t>(h);
  r.action_freq.assign(H, {0.0, 0.0, 0.0});
  std::vector<double> sum(H, 0.0), sum_sq(H, 0.0);
  for (const auto& ep : logs) {
    double running = 0.0;
    for (const auto& rec : ep.records) {
      const auto t = static_cast<std::size_t>(rec.t);
      r.action_freq[t][index_of(rec.action)] += 1.0;
      running += rec.reward;
      sum[t] += running;
      sum_sq[t] += running * running;
    }
  }
  const double n = static_cast<double>(logs.size());
  r.cum_reward_mean.resize(H);
  r.cum_reward_ci95.resize(H);
  for (std::size_t t = 0; t < H; ++t) {
    for (auto& v : r.action_freq[t]) v /= n;
    const double mean = sum[t] / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq[t] - n * mean * mean) / (n - 1)) : 0.0;
    r.cum_reward_mean[t] = mean;
    r.cum_reward_ci95[t] = 1.96 * std::sqrt(var / n);
  }
  return r;
}

/// Greedy (exploration-free) evaluation against the factual environment.
inline EvalResult evaluate(const Policy& policy, const UserProfile& profile,
                           std::int64_t episodes, const EnvConfig& env) {
  if (episodes < 1) throw std::invalid_argument("evaluation needs at least one episode");
  const auto logs = collect_episodes(policy, profile, episodes, env);
  return summarize(logs, profile.name, policy.tag, env.horizon);
}

struct Comparison {
  std::vector<EvalResult> results;

  /// Final cumulative reward per (profile, policy), one row per profile.
  std::string summary() const {
    std::vector<std::string> profiles, policies;
    std::map<std::pair<std::string, std::string>, const EvalResult*> cell;
    for (const auto& r : results) {
      if (std::find(profiles.begin(), profiles.end(), r.profile) == profiles.end())
        profiles.push_back(r.profile);
      if (std::find(policies.begin(), policies.end(), r.policy) == policies.end())
        policies.push_back(r.policy);
      cell[{r.profile, r.policy}] = &r;
    }
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-22s", "profile");
    os << buf;
    for (const auto& p : policies) {
      std::snprintf(buf, sizeof buf, " %16s", p.c_str());
      os << buf;
    }
    os << '\n';
    for (const auto& prof : profiles) {
      std::snprintf(buf, sizeof buf, "%-22s", prof.c_str());
      os << buf;
      for (const auto& p : policies) {
        auto it = cell.find({prof, p});
        if (it == cell.end() || it->second->cum_reward_mean.empty()) {
          std::snprintf(buf, sizeof buf, " %16s", "-");
        } else {
          const auto* r = it->second;
          std::snprintf(buf, sizeof buf, " %8.3f +- %5.3f", r->cum_reward_mean.back(),
                        r->cum_reward_ci95.back());
        }
        os << buf;
      }
      os << '\n';
    }
    return os.str();
  }
};

/// Every (policy, profile) pair; evaluation streams depend only on the
/// profile, so all policies see the same users.
inline Comparison compare(const std::vector<UserProfile>& profiles,
                          const std::vector<Policy>& policies, std::int64_t episodes,
                          const EnvConfig& env) {
  if (profiles.empty() || policies.empty())
    throw std::invalid_argument("compare needs at least one profile and one policy");
  Comparison c;
  for (const auto& prof : profiles)
    for (const auto& pol : policies) c.results.push_back(evaluate(pol, prof, episodes, env));
  return c;
}

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw IoError("failed writing " + path.string());
}

inline std::string to_csv(const EvalResult& r) {
  std::string out = "t,p_left,p_centre,p_right,cum_reward_mean,cum_reward_ci95\n";
  for (std::size_t t = 0; t < r.cum_reward_mean.size(); ++t) {
    out += std::to_string(t);
    for (double p : r.action_freq[t]) out += "," + format_number(p);
    out += "," + format_number(r.cum_reward_mean[t]) + "," + format_number(r.cum_reward_ci95[t]) + "\n";
  }
  return out;
}

inline void emit_csv(const EvalResult& r, const std::filesystem::path& path) {
  write_file(path, to_csv(r));
}

/// Lowercase alphanumerics; everything else becomes '-'.
inline std::string slug(std::string_view s) {
  std::string out;
  for (char c : s)
    out += std::isalnum(static_cast<unsigned char>(c))
               ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
               : '-';
  return out;
}

namespace svg {

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Series {
  std::string name;
  std::string colour;
  std::vector<double> y;
};

// Plot area geometry.
inline constexpr double kWidth = 640, kHeight = 380;
inline constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;

inline std::string line_chart(const std::string& title, const std::string& y_label,
                              const std::vector<Series>& series, double y_max,
                              const std::string& data_csv) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::size_t n = 0;
  for (const auto& s : series) n = std::max(n, s.y.size());
  const double x_span = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto X = [&](std::size_t t) { return kLeft + pw * static_cast<double>(t) / x_span; };
  auto Y = [&](double v) { return kTop + ph * (1.0 - v / y_max); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
     << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight)
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<title>" << escape(title) << "</title>\n"
     << "<metadata><![CDATA[\n" << data_csv << "]]></metadata>\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
     << "\" fill=\"white\"/>\n"
     << "<text x=\"" << fmt(kLeft) << "\" y=\"24\" font-size=\"14\">" << escape(title)
     << "</text>\n";
  // Axes and ticks.
  os << "<g stroke=\"#333\" fill=\"none\">\n"
     << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\""
     << fmt(kLeft + pw) << "\" y2=\"" << fmt(kTop + ph) << "\"/>\n"
     << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
     << "\" y2=\"" << fmt(kTop + ph) << "\"/>\n</g>\n";
  os << "<g fill=\"#333\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y_max * i / 4.0;
    os << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(Y(v) + 4)
       << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  const std::size_t step = n > 10 ? 5 : 1;
  for (std::size_t t = 0; t < n; t += step)
    os << "<text x=\"" << fmt(X(t)) << "\" y=\"" << fmt(kTop + ph + 16)
       << "\" text-anchor=\"middle\">" << t << "</text>\n";
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 10)
     << "\" text-anchor=\"middle\">time-step</text>\n"
     << "<text x=\"16\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << fmt(kTop + ph / 2) << ")\">" << escape(y_label) << "</text>\n</g>\n";
  // Series and legend.
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << s.colour << "\" points=\"";
    for (std::size_t t = 0; t < s.y.size(); ++t)
      os << (t ? " " : "") << fmt(X(t)) << ',' << fmt(Y(s.y[t]));
    os << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << fmt(kLeft + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\""
       << fmt(kLeft + pw + 32) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << s.colour
       << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << fmt(kLeft + pw + 38) << "\" y=\"" << fmt(ly + 4) << "\">"
       << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline const char* colour_for(const std::string& tag) {
  if (tag == "learned") return "#d62728";
  if (tag == "random") return "#7f7f7f";
  if (tag == "bandit") return "#1f77b4";
  return "#2ca02c";
}

}  // namespace svg

/// Action-probability chart for one result.
inline std::string action_chart_svg(const EvalResult& r) {
  std::vector<svg::Series> series = {{"left", "#1f77b4", {}},
                                     {"centre", "#7f7f7f", {}},
                                     {"right", "#d62728", {}}};
  for (const auto& row : r.action_freq)
    for (int a = 0; a < 3; ++a) series[a].y.push_back(row[a]);
  return svg::line_chart(r.profile + ": action probabilities (" + r.policy + ")",
                         "probability", series, 1.0, to_csv(r));
}

/// Cumulative-reward chart overlaying every policy evaluated on one profile.
inline std::string reward_chart_svg(const std::vector<const EvalResult*>& results) {
  std::vector<svg::Series> series;
  std::string data;
  double y_max = 1.0;
  for (const auto* r : results) {
    series.push_back({r->policy, svg::colour_for(r->policy), r->cum_reward_mean});
    for (double v : r->cum_reward_mean) y_max = std::max(y_max, v);
    data += "# " + r->policy + "\n" + to_csv(*r);
  }
  y_max = std::ceil(y_max / 4.0) * 4.0;
  const std::string profile = results.empty() ? "" : results.front()->profile;
  return svg::line_chart(profile + ": expected cumulative reward", "reward", series, y_max, data);
}

/// Two charts per profile: <prefix><profile>_actions.svg (learned policy,
/// or the first policy if none is tagged learned) and <prefix><profile>_reward.svg.
inline std::vector<std::filesystem::path> emit_svg_charts(const std::vector<EvalResult>& results,
                                                          const std::string& path_prefix) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EvalResult*>> by_profile;
  for (const auto& r : results) {
    if (!by_profile.contains(r.profile)) order.push_back(r.profile);
    by_profile[r.profile].push_back(&r);
  }
  std::vector<std::filesystem::path> written;
  for (const auto& prof : order) {
    const auto& rs = by_profile[prof];
    const EvalResult* main = rs.front();
    for (const auto* r : rs)
      if (r->policy == "learned") {
        main = r;
        break;
      }
    const std::filesystem::path actions = path_prefix + slug(prof) + "_actions.svg";
    const std::filesystem::path rewards = path_prefix + slug(prof) + "_reward.svg";
    write_file(actions, action_chart_svg(*main));
    write_file(rewards, reward_chart_svg(rs));
    written.push_back(actions);
    written.push_back(rewards);
  }
  return written;
}

/// Everything an experiment run needs beyond the environment itself.
struct ExperimentConfig {
  EnvConfig env = default_env_config();
  TrainSchedule schedule;
  std::int64_t eval_episodes = 10'000;
  std::vector<UserProfile> unseen = unseen_population();
  TrainPairOptions pair;
};

inline void to_json(nlohmann::json& j, const TrainSchedule& s) {
  j = nlohmann::json{{"episodes", s.episodes},
                     {"alpha", s.alpha},
                     {"alpha_decay", s.alpha_decay},
                     {"epsilon_start", s.epsilon_start},
                     {"epsilon_end", s.epsilon_end},
                     {"epsilon_decay_fraction", s.epsilon_decay_fraction}};
}

inline void from_json(const nlohmann::json& j, TrainSchedule& s) {
  s = TrainSchedule{};
  s.episodes = j.value("episodes", s.episodes);
  s.alpha = j.value("alpha", s.alpha);
  s.alpha_decay = j.value("alpha_decay", s.alpha_decay);
  s.epsilon_start = j.value("epsilon_start", s.epsilon_start);
  s.epsilon_end = j.value("epsilon_end", s.epsilon_end);
  s.epsilon_decay_fraction = j.value("epsilon_decay_fraction", s.epsilon_decay_fraction);
  s.check();
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = c.env;
  j["training"] = c.schedule;
  j["eval_episodes"] = c.eval_episodes;
  j["unseen_population"] = c.unseen;
  j["freeze_exploration"] = c.pair.freeze_exploration;
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.env = j.get<EnvConfig>();
  if (j.contains("training")) c.schedule = j.at("training").get<TrainSchedule>();
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  if (j.contains("unseen_population"))
    c.unseen = j.at("unseen_population").get<std::vector<UserProfile>>();
  c.pair.freeze_exploration = j.value("freeze_exploration", c.pair.freeze_exploration);
  if (c.eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(is).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config " + path.string() + ": " + e.what());
  }
}

/// Evaluates the factual greedy policy on every population profile, then runs
/// the counterfactual comparison over the states it visits.
inline TamperReport run_tamper_detection(const ExperimentConfig& cfg, const TrainedPair& pair) {
  const Policy learned = make_state_policy(GreedyPolicy(pair.factual), "learned");
  std::vector<EpisodeHistory> all;
  std::map<std::string, PhaseMetrics> phases;
  for (const auto& prof : cfg.env.population) {
    auto logs = collect_episodes(learned, prof, cfg.eval_episodes, cfg.env);
    phases[prof.name] = phase_profile(logs, prof, cfg.env.horizon);
    all.insert(all.end(), std::make_move_iterator(logs.begin()),
               std::make_move_iterator(logs.end()));
  }
  TamperReport report =
      detect_exploitation(pair.factual, pair.counterfactual, all, cfg.env.horizon);
  report.phase_metrics = std::move(phases);
  return report;
}

struct RunManifest {
  nlohmann::json config;
  std::uint64_t master_seed = 0;
  std::string version = kVersion;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  j = nlohmann::json{{"config", m.config},           {"master_seed", m.master_seed},
                     {"version", m.version},         {"started_at", m.started_at},
                     {"finished_at", m.finished_at}, {"outputs", m.outputs}};
}

}  // namespace tamperlab
