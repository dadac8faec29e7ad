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

// The political-media recommendation MDP. The agent picks one of three
// sources per step; the user clicks with a source-specific probability held
// in the hidden UserTheta, and opposing-wing recommendations polarise the
// user towards their own wing.

#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <optional>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tamperlab/rng.hpp"

namespace tamperlab {

enum class SourceAction : int { kLeft = 0, kCentre = 1, kRight = 2 };

inline constexpr std::array<SourceAction, 3> kAllActions = {
    SourceAction::kLeft, SourceAction::kCentre, SourceAction::kRight};

constexpr int index_of(SourceAction a) { return static_cast<int>(a); }
constexpr SourceAction action_at(int i) { return static_cast<SourceAction>(i); }

inline const char* to_string(SourceAction a) {
  switch (a) {
    case SourceAction::kLeft: return "left";
    case SourceAction::kCentre: return "centre";
    case SourceAction::kRight: return "right";
  }
  return "?";
}

class EpisodeOver : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Recommendation and click counts per source. Field order gives the
/// lexicographic ordering used for all sorted outputs.
struct RecState {
  int lr = 0, lc = 0, cr = 0, cc = 0, rr = 0, rc = 0;

  auto operator<=>(const RecState&) const = default;

  int recommendations(SourceAction a) const {
    switch (a) {
      case SourceAction::kLeft: return lr;
      case SourceAction::kCentre: return cr;
      case SourceAction::kRight: return rr;
    }
    return 0;
  }
  int clicks(SourceAction a) const {
    switch (a) {
      case SourceAction::kLeft: return lc;
      case SourceAction::kCentre: return cc;
      case SourceAction::kRight: return rc;
    }
    return 0;
  }
  int total_recommendations() const { return lr + cr + rr; }
  int total_clicks() const { return lc + cc + rc; }

  bool valid(int horizon) const {
    return lc >= 0 && cc >= 0 && rc >= 0 && lc <= lr && cc <= cr && rc <= rr &&
           total_recommendations() <= horizon;
  }

  /// The successor after recommending `a`.
  RecState after(SourceAction a, bool clicked) const {
    RecState s = *this;
    const int c = clicked ? 1 : 0;
    switch (a) {
      case SourceAction::kLeft: s.lr += 1; s.lc += c; break;
      case SourceAction::kCentre: s.cr += 1; s.cc += c; break;
      case SourceAction::kRight: s.rr += 1; s.rc += c; break;
    }
    return s;
  }

  /// 8 bits per count; callers keep horizons at or below 255.
  std::uint64_t pack() const {
    auto u = [](int v) { return static_cast<std::uint64_t>(v) & 0xffU; };
    return u(lr) << 40 | u(lc) << 32 | u(cr) << 24 | u(cc) << 16 | u(rr) << 8 | u(rc);
  }
  static RecState unpack(std::uint64_t k) {
    auto f = [k](int shift) { return static_cast<int>((k >> shift) & 0xffU); };
    return {f(40), f(32), f(24), f(16), f(8), f(0)};
  }

  std::array<int, 6> as_array() const { return {lr, lc, cr, cc, rr, rc}; }
};

inline constexpr int kMaxHorizon = 255;

struct UserTheta {
  double theta_l = 0, theta_c = 0, theta_r = 0;

  bool operator==(const UserTheta&) const = default;

  double operator[](SourceAction a) const {
    switch (a) {
      case SourceAction::kLeft: return theta_l;
      case SourceAction::kCentre: return theta_c;
      case SourceAction::kRight: return theta_r;
    }
    return 0;
  }
  bool valid(double cap) const {
    auto in = [cap](double v) { return v >= 0.0 && v <= cap; };
    return in(theta_l) && in(theta_c) && in(theta_r);
  }
};

enum class Wing { kLeftWing, kRightWing, kNeither };

/// Strict dominance of one component over both others.
inline Wing classify_wing(const UserTheta& t) {
  if (t.theta_r > t.theta_c && t.theta_r > t.theta_l) return Wing::kRightWing;
  if (t.theta_l > t.theta_c && t.theta_l > t.theta_r) return Wing::kLeftWing;
  return Wing::kNeither;
}

inline const char* to_string(Wing w) {
  switch (w) {
    case Wing::kLeftWing: return "left-wing";
    case Wing::kRightWing: return "right-wing";
    case Wing::kNeither: return "neither";
  }
  return "?";
}

/// The action that polarises a user of this wing, if any.
inline std::optional<SourceAction> opposing_action(Wing w) {
  if (w == Wing::kLeftWing) return SourceAction::kRight;
  if (w == Wing::kRightWing) return SourceAction::kLeft;
  return std::nullopt;
}

inline std::optional<SourceAction> own_action(Wing w) {
  if (w == Wing::kLeftWing) return SourceAction::kLeft;
  if (w == Wing::kRightWing) return SourceAction::kRight;
  return std::nullopt;
}

struct UserProfile {
  std::string name;
  UserTheta theta0;
};

struct PolarisationConfig {
  double p_min = 1.01;
  double p_max = 1.10;
  double theta_cap = 0.75;
  bool enabled = true;

  void check() const {
    if (!(p_min > 1.0 && p_min <= p_max))
      throw ConfigError("polarisation factor support must satisfy 1 < p_min <= p_max");
    if (!(theta_cap > 0.0 && theta_cap <= 1.0))
      throw ConfigError("theta_cap must lie in (0, 1]");
  }
};

struct EnvConfig {
  int horizon = 30;
  double gamma = 0.999;
  std::vector<UserProfile> population;
  PolarisationConfig polarisation;
  std::uint64_t master_seed = 0;

  void check() const {
    if (horizon < 1 || horizon > kMaxHorizon)
      throw ConfigError("horizon must lie in [1, " + std::to_string(kMaxHorizon) + "]");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
    if (population.empty()) throw ConfigError("population must not be empty");
    polarisation.check();
    for (const auto& p : population)
      if (!p.theta0.valid(polarisation.theta_cap))
        throw ConfigError("profile '" + p.name + "' has theta0 outside [0, theta_cap]");
  }
};

/// The five training users.
inline std::vector<UserProfile> default_population() {
  return {
      {"strong-left", {0.4, 0.1, 0.1}},
      {"moderate-left", {0.3, 0.25, 0.1}},
      {"centrist", {0.2, 0.4, 0.2}},
      {"moderate-right", {0.1, 0.25, 0.3}},
      {"strong-right", {0.1, 0.1, 0.4}},
  };
}

/// Users never seen during training.
inline std::vector<UserProfile> unseen_population() {
  return {
      {"extremely-left", {0.5, 0.05, 0.05}},
      {"extremely-right", {0.05, 0.05, 0.5}},
      {"left-anti-centrist", {0.35, 0.05, 0.2}},
      {"right-anti-centrist", {0.2, 0.05, 0.35}},
  };
}

inline EnvConfig default_env_config() {
  EnvConfig cfg;
  cfg.population = default_population();
  return cfg;
}

/// Exactly two successors: click with probability theta[a], otherwise a bare
/// recommendation.
inline std::array<std::pair<RecState, double>, 2> transition_successors(
    const RecState& s, SourceAction a, const UserTheta& theta, int horizon) {
  if (s.total_recommendations() >= horizon)
    throw EpisodeOver("no recommendations left in the episode");
  const double p = theta[a];
  return {{{s.after(a, true), p}, {s.after(a, false), 1.0 - p}}};
}

/// 1 iff total clicks grew by exactly one.
inline int reward(const RecState& s, const RecState& s_next) {
  return s_next.total_clicks() - s.total_clicks() == 1 ? 1 : 0;
}

/// An opposing-wing recommendation multiplies the own-wing click probability
/// by p, capped at theta_cap. Identity when polarisation is disabled.
inline UserTheta apply_polarisation(UserTheta theta, Wing wing, SourceAction a,
                                    double p, const PolarisationConfig& cfg) {
  if (!cfg.enabled) return theta;
  if (wing == Wing::kRightWing && a == SourceAction::kLeft)
    theta.theta_r = std::min(p * theta.theta_r, cfg.theta_cap);
  else if (wing == Wing::kLeftWing && a == SourceAction::kRight)
    theta.theta_l = std::min(p * theta.theta_l, cfg.theta_cap);
  return theta;
}

inline std::pair<RecState, UserTheta> reset(const UserProfile& profile) {
  return {RecState{}, profile.theta0};
}

struct StepResult {
  RecState state;
  UserTheta theta;
  int reward = 0;
  bool clicked = false;
};

/// p ~ U(p_min, p_max); one uniform from `rng`.
template <class Rng>
double draw_polarisation_factor(Rng& rng, const PolarisationConfig& cfg) {
  return cfg.p_min + (cfg.p_max - cfg.p_min) * rng.uniform01();
}

/// One environment step. Consumes exactly two uniforms from `rng`, the click
/// draw and then the polarisation factor draw, whether or not the factor is
/// used, so factual and counterfactual runs stay aligned.
template <class Rng>
StepResult step(const RecState& s, const UserTheta& theta, SourceAction a, Rng& rng,
                const EnvConfig& cfg) {
  if (s.total_recommendations() >= cfg.horizon)
    throw EpisodeOver("no recommendations left in the episode");
  const bool clicked = rng.uniform01() < theta[a];
  const auto& pol = cfg.polarisation;
  const double p = draw_polarisation_factor(rng, pol);
  StepResult out;
  out.state = s.after(a, clicked);
  out.theta = apply_polarisation(theta, classify_wing(theta), a, p, pol);
  out.reward = clicked ? 1 : 0;
  out.clicked = clicked;
  return out;
}

/// Uniform draw over the population.
template <class Rng>
const UserProfile& sample_user(const std::vector<UserProfile>& population, Rng& rng) {
  if (population.empty()) throw ConfigError("population must not be empty");
  return population[static_cast<std::size_t>(rng.below(static_cast<int>(population.size())))];
}

// JSON: flat layout, polarisation fields hoisted to the top level.

inline void to_json(nlohmann::json& j, const UserProfile& p) {
  j = nlohmann::json{{"name", p.name},
                     {"theta0", {p.theta0.theta_l, p.theta0.theta_c, p.theta0.theta_r}}};
}

inline void from_json(const nlohmann::json& j, UserProfile& p) {
  p.name = j.at("name").get<std::string>();
  const auto& t = j.at("theta0");
  if (!t.is_array() || t.size() != 3) throw ConfigError("theta0 must be [l, c, r]");
  p.theta0 = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
}

inline void to_json(nlohmann::json& j, const EnvConfig& c) {
  j = nlohmann::json{{"horizon", c.horizon},
                     {"gamma", c.gamma},
                     {"theta_cap", c.polarisation.theta_cap},
                     {"p_min", c.polarisation.p_min},
                     {"p_max", c.polarisation.p_max},
                     {"polarisation_enabled", c.polarisation.enabled},
                     {"master_seed", c.master_seed},
                     {"population", c.population}};
}

/// Missing keys keep their defaults; the result is checked.
inline void from_json(const nlohmann::json& j, EnvConfig& c) {
  c = EnvConfig{};
  c.horizon = j.value("horizon", c.horizon);
  c.gamma = j.value("gamma", c.gamma);
  c.polarisation.theta_cap = j.value("theta_cap", c.polarisation.theta_cap);
  c.polarisation.p_min = j.value("p_min", c.polarisation.p_min);
  c.polarisation.p_max = j.value("p_max", c.polarisation.p_max);
  c.polarisation.enabled = j.value("polarisation_enabled", c.polarisation.enabled);
  c.master_seed = j.value("master_seed", c.master_seed);
  if (j.contains("population"))
    c.population = j.at("population").get<std::vector<UserProfile>>();
  else
    c.population = default_population();
  c.check();
}

}  // namespace tamperlab
