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

// Exact evaluators for a single known user with a deterministic polarisation
// factor. With p fixed, the user's click probabilities after k opposing-wing
// recommendations are a function of k alone, so the recommendation counts
// (plus that k) form a finite Markov state and expectations can be computed
// by plain dynamic programming instead of sampling.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tamperlab/env.hpp"

namespace tamperlab::oracle {

class IntractableHorizon : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleOptions {
  // 3003 is the number of recommendation states for h = 8.
  std::size_t state_budget = 3003;
  // 1.0 gives the undiscounted objective used by the cumulative-reward curves.
  double gamma = 1.0;
};

struct AugmentedState {
  RecState rec;
  int opposing_count = 0;
  auto operator<=>(const AugmentedState&) const = default;
};

using StatePolicy = std::function<SourceAction(const RecState&)>;

/// Number of recommendation states with at most h recommendations.
inline std::uint64_t state_count(int h) {
  // C(h + 6, 6)
  std::uint64_t c = 1;
  for (int i = 1; i <= 6; ++i) c = c * static_cast<std::uint64_t>(h + i) / static_cast<std::uint64_t>(i);
  return c;
}

namespace detail {

inline void require_deterministic(const PolarisationConfig& cfg) {
  if (cfg.p_min != cfg.p_max)
    throw std::invalid_argument("oracle requires a deterministic polarisation factor (p_min == p_max)");
}

// Click probabilities by opposing count, built by repeated application of the
// per-step update so rounding matches a simulated trajectory.
class ThetaByOpposing {
 public:
  ThetaByOpposing(const UserProfile& profile, const PolarisationConfig& cfg, int h)
      : wing_(classify_wing(profile.theta0)) {
    const auto opp = opposing_action(wing_);
    thetas_.push_back(profile.theta0);
    for (int k = 1; k <= h; ++k)
      thetas_.push_back(opp ? apply_polarisation(thetas_.back(), wing_, *opp, cfg.p_min, cfg)
                            : thetas_.back());
  }

  AugmentedState augment(const RecState& s) const {
    const auto opp = opposing_action(wing_);
    return {s, opp ? s.recommendations(*opp) : 0};
  }

  const UserTheta& at(const RecState& s) const {
    return thetas_[static_cast<std::size_t>(augment(s).opposing_count)];
  }

 private:
  Wing wing_;
  std::vector<UserTheta> thetas_;
};

}  // namespace detail

/// Running expected total reward after each of the h steps, by forward
/// propagation of the exact state distribution under `policy`.
inline std::vector<double> exact_policy_value(const StatePolicy& policy,
                                              const UserProfile& profile, int h,
                                              const PolarisationConfig& cfg,
                                              const OracleOptions& opts = {}) {
  detail::require_deterministic(cfg);
  const detail::ThetaByOpposing theta(profile, cfg, h);
  std::map<RecState, double> layer{{RecState{}, 1.0}};
  std::vector<double> running;
  running.reserve(static_cast<std::size_t>(h));
  std::size_t seen = 1;
  double total = 0.0;
  double discount = 1.0;
  for (int t = 0; t < h; ++t) {
    std::map<RecState, double> next;
    double expected_clicks = 0.0;
    for (const auto& [s, mass] : layer) {
      const SourceAction a = policy(s);
      for (const auto& [succ, prob] : transition_successors(s, a, theta.at(s), h)) {
        if (prob == 0.0) continue;
        next[succ] += mass * prob;
        if (succ.total_clicks() > s.total_clicks()) expected_clicks += mass * prob;
      }
    }
    seen += next.size();
    if (seen > opts.state_budget)
      throw IntractableHorizon("policy evaluation visits more than " +
                               std::to_string(opts.state_budget) + " states");
    total += discount * expected_clicks;
    discount *= opts.gamma;
    running.push_back(total);
    layer = std::move(next);
  }
  return running;
}

/// Expected total at the horizon by backward induction over every state.
/// Independent route to the final entry of exact_policy_value.
inline double policy_value_backward(const StatePolicy& policy, const UserProfile& profile,
                                    int h, const PolarisationConfig& cfg,
                                    const OracleOptions& opts = {}) {
  detail::require_deterministic(cfg);
  if (state_count(h) > opts.state_budget)
    throw IntractableHorizon("horizon " + std::to_string(h) + " exceeds the state budget");
  const detail::ThetaByOpposing theta(profile, cfg, h);
  std::unordered_map<std::uint64_t, double> memo;
  std::function<double(const RecState&)> value = [&](const RecState& s) -> double {
    if (s.total_recommendations() == h) return 0.0;
    auto it = memo.find(s.pack());
    if (it != memo.end()) return it->second;
    const SourceAction a = policy(s);
    const double p = theta.at(s)[a];
    const double v = p * (1.0 + opts.gamma * value(s.after(a, true))) +
                     (1.0 - p) * opts.gamma * value(s.after(a, false));
    memo.emplace(s.pack(), v);
    return v;
  };
  return value(RecState{});
}

/// Optimal expected return and an optimal action for every state, lowest
/// action index on ties.
struct OptimalSolution {
  double value = 0.0;
  std::unordered_map<std::uint64_t, SourceAction> actions;
  std::unordered_map<std::uint64_t, double> values;

  SourceAction operator()(const RecState& s) const {
    auto it = actions.find(s.pack());
    return it == actions.end() ? SourceAction::kLeft : it->second;
  }
  double value_at(const RecState& s) const {
    auto it = values.find(s.pack());
    return it == values.end() ? 0.0 : it->second;
  }
};

namespace detail {

// Calls f for every state with exactly n recommendations.
template <class F>
void for_each_state_with_total(int n, F&& f) {
  for (int lr = 0; lr <= n; ++lr)
    for (int cr = 0; lr + cr <= n; ++cr) {
      const int rr = n - lr - cr;
      for (int lc = 0; lc <= lr; ++lc)
        for (int cc = 0; cc <= cr; ++cc)
          for (int rc = 0; rc <= rr; ++rc) f(RecState{lr, lc, cr, cc, rr, rc});
    }
}

}  // namespace detail

inline OptimalSolution brute_force_optimal(const UserProfile& profile, int h,
                                           const PolarisationConfig& cfg,
                                           const OracleOptions& opts = {}) {
  detail::require_deterministic(cfg);
  if (h < 1) throw std::invalid_argument("horizon must be positive");
  if (state_count(h) > opts.state_budget)
    throw IntractableHorizon("horizon " + std::to_string(h) + " needs " +
                             std::to_string(state_count(h)) + " states, budget is " +
                             std::to_string(opts.state_budget));
  const detail::ThetaByOpposing theta(profile, cfg, h);
  OptimalSolution out;
  std::unordered_map<std::uint64_t, double> next_values;  // total = n + 1
  for (int n = h - 1; n >= 0; --n) {
    std::unordered_map<std::uint64_t, double> cur;
    detail::for_each_state_with_total(n, [&](const RecState& s) {
      auto v_of = [&](const RecState& x) {
        if (n + 1 == h) return 0.0;
        return next_values.at(x.pack());
      };
      double best = 0.0;
      SourceAction best_a = SourceAction::kLeft;
      for (auto a : kAllActions) {
        const double p = theta.at(s)[a];
        const double q = p * (1.0 + opts.gamma * v_of(s.after(a, true))) +
                         (1.0 - p) * opts.gamma * v_of(s.after(a, false));
        if (a == SourceAction::kLeft || q > best) {
          best = q;
          best_a = a;
        }
      }
      cur.emplace(s.pack(), best);
      out.actions.emplace(s.pack(), best_a);
      out.values.emplace(s.pack(), best);
    });
    next_values = std::move(cur);
  }
  out.value = next_values.at(RecState{}.pack());
  return out;
}

/// Factual value minus the value with polarisation disabled, at the horizon.
inline double policy_value_counterfactual_gap(const StatePolicy& policy,
                                              const UserProfile& profile, int h,
                                              const PolarisationConfig& cfg,
                                              const OracleOptions& opts = {}) {
  PolarisationConfig off = cfg;
  off.enabled = false;
  return exact_policy_value(policy, profile, h, cfg, opts).back() -
         exact_policy_value(policy, profile, h, off, opts).back();
}

/// Best value among constant-action policies in the world without
/// polarisation, where each is an i.i.d. Bernoulli sum: h * max(theta0).
inline double best_polarisation_free_stationary_value(const UserProfile& profile, int h,
                                                      const PolarisationConfig& cfg,
                                                      const OracleOptions& opts = {}) {
  PolarisationConfig off = cfg;
  off.enabled = false;
  double best = 0.0;
  for (auto a : kAllActions) {
    const StatePolicy always = [a](const RecState&) { return a; };
    best = std::max(best, exact_policy_value(always, profile, h, off, opts).back());
  }
  return best;
}

}  // namespace tamperlab::oracle
