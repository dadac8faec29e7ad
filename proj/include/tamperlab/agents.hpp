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

// Tabular Q-learning with epsilon-greedy exploration, greedy policy
// extraction, and the two reference recommenders (uniform random and the
// explore-then-exploit bandit).

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tamperlab/env.hpp"
#include "tamperlab/rng.hpp"

namespace tamperlab {

using ActionValues = std::array<double, 3>;

/// Lowest index among the maxima.
inline SourceAction argmax_action(const ActionValues& q) {
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (q[i] > q[best]) best = i;
  return action_at(best);
}

class QTable {
 public:
  struct Entry {
    ActionValues q{};
    std::array<std::uint64_t, 3> visits{};
    bool operator==(const Entry&) const = default;
  };

  /// Absent states read as all zeros.
  ActionValues values(const RecState& s) const {
    auto it = entries_.find(s.pack());
    return it == entries_.end() ? ActionValues{} : it->second.q;
  }

  double max_value(const RecState& s) const {
    const auto q = values(s);
    return std::max({q[0], q[1], q[2]});
  }

  std::uint64_t visits(const RecState& s, SourceAction a) const {
    auto it = entries_.find(s.pack());
    return it == entries_.end() ? 0 : it->second.visits[index_of(a)];
  }

  Entry& entry(const RecState& s) { return entries_[s.pack()]; }
  void set(const RecState& s, const ActionValues& q) { entries_[s.pack()].q = q; }

  bool contains(const RecState& s) const { return entries_.contains(s.pack()); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void reserve(std::size_t n) { entries_.reserve(n); }

  std::uint64_t total_visits() const {
    std::uint64_t n = 0;
    for (const auto& [k, e] : entries_) n += e.visits[0] + e.visits[1] + e.visits[2];
    return n;
  }

  /// Entries in lexicographic state order.
  std::vector<std::pair<RecState, Entry>> sorted_entries() const {
    std::vector<std::pair<RecState, Entry>> out;
    out.reserve(entries_.size());
    for (const auto& [k, e] : entries_) out.emplace_back(RecState::unpack(k), e);
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

  template <class F>
  void for_each(F&& f) const {
    for (const auto& [k, e] : entries_) f(RecState::unpack(k), e);
  }

  template <class F>
  void transform_values(F&& f) {
    for (auto& [k, e] : entries_)
      for (auto& v : e.q) v = f(v);
  }

  bool operator==(const QTable& o) const { return entries_ == o.entries_; }

 private:
  std::unordered_map<std::uint64_t, Entry> entries_;
};

/// One Q-learning backup; bootstraps from max_a' Q(s_next, a') unless terminal.
inline void q_update(QTable& q, const RecState& s, SourceAction a, double r,
                     const RecState& s_next, bool terminal, double alpha, double gamma) {
  const double target = r + (terminal ? 0.0 : gamma * q.max_value(s_next));
  auto& e = q.entry(s);
  double& v = e.q[index_of(a)];
  v += alpha * (target - v);
  e.visits[index_of(a)] += 1;
}

/// Always draws the exploration coin, so the stream advances identically for
/// every table.
template <class Rng>
SourceAction select_epsilon_greedy(const QTable& q, const RecState& s, double epsilon,
                                   Rng& rng) {
  if (rng.uniform01() < epsilon) return action_at(rng.below(3));
  return argmax_action(q.values(s));
}

/// Deterministic greedy extraction. Holds a reference: the table must
/// outlive the policy.
class GreedyPolicy {
 public:
  explicit GreedyPolicy(const QTable& q) : q_(&q) {}
  SourceAction operator()(const RecState& s) const { return argmax_action(q_->values(s)); }
  const QTable& table() const { return *q_; }

 private:
  const QTable* q_;
};

inline GreedyPolicy greedy_policy(const QTable& q) { return GreedyPolicy(q); }

template <class Rng>
SourceAction random_policy(Rng& rng) {
  return action_at(rng.below(3));
}

struct StepRecord {
  int t = 0;
  RecState state;  // before the action
  SourceAction action = SourceAction::kLeft;
  int reward = 0;
  bool clicked = false;
};

struct EpisodeHistory {
  std::string profile;
  std::vector<StepRecord> records;
  RecState totals;  // per-source recommendations and clicks so far

  void append(SourceAction a, int reward, bool clicked) {
    records.push_back({static_cast<int>(records.size()), totals, a, reward, clicked});
    totals = totals.after(a, clicked);
  }

  /// Within-episode mean reward of a source; untried sources read as 0.
  double mean_reward(SourceAction a) const {
    const int n = totals.recommendations(a);
    return n == 0 ? 0.0 : static_cast<double>(totals.clicks(a)) / n;
  }
};

/// Uniform exploration for the first floor(h/3) steps, then the source with
/// the best within-episode mean reward; ties (including the all-untried case)
/// break uniformly at random.
template <class Rng>
SourceAction bandit_policy(const EpisodeHistory& history, int t, int h, Rng& rng) {
  if (t < h / 3) return action_at(rng.below(3));
  std::array<double, 3> means{};
  for (auto a : kAllActions) means[index_of(a)] = history.mean_reward(a);
  const double best = std::max({means[0], means[1], means[2]});
  std::array<int, 3> tied{};
  int n = 0;
  for (int i = 0; i < 3; ++i)
    if (means[i] == best) tied[n++] = i;
  return action_at(n == 1 ? tied[0] : tied[rng.below(n)]);
}

/// An episode-level policy as used by the evaluation harness.
struct Policy {
  std::string tag;
  std::function<SourceAction(const EpisodeHistory&, int, Stream&)> act;
};

inline Policy make_learned_policy(std::shared_ptr<const QTable> q, std::string tag = "learned") {
  return {std::move(tag), [q = std::move(q)](const EpisodeHistory& h, int, Stream&) {
            return argmax_action(q->values(h.totals));
          }};
}

template <class StatePolicy>
Policy make_state_policy(StatePolicy f, std::string tag) {
  return {std::move(tag),
          [f = std::move(f)](const EpisodeHistory& h, int, Stream&) { return f(h.totals); }};
}

inline Policy make_random_policy() {
  return {"random", [](const EpisodeHistory&, int, Stream& rng) { return random_policy(rng); }};
}

inline Policy make_bandit_policy(int horizon) {
  return {"bandit", [horizon](const EpisodeHistory& h, int t, Stream& rng) {
            return bandit_policy(h, t, horizon, rng);
          }};
}

inline Policy make_constant_policy(SourceAction a) {
  return {std::string("always-") + to_string(a),
          [a](const EpisodeHistory&, int, Stream&) { return a; }};
}

struct TrainSchedule {
  std::int64_t episodes = 100'000'000;
  // With alpha_decay = 0 every backup uses alpha. Otherwise the n-th backup of
  // a state-action pair uses max(alpha, n^-alpha_decay).
  double alpha = 0.001;
  double alpha_decay = 0.7;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  double epsilon_decay_fraction = 0.8;

  void check() const {
    if (episodes < 0) throw ConfigError("episodes must be non-negative");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (!(alpha_decay >= 0.0 && alpha_decay <= 1.0))
      throw ConfigError("alpha_decay must lie in [0, 1]");
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(epsilon_start) || !unit(epsilon_end) || epsilon_start < epsilon_end)
      throw ConfigError("need 1 >= epsilon_start >= epsilon_end >= 0");
    if (!unit(epsilon_decay_fraction))
      throw ConfigError("epsilon_decay_fraction must lie in [0, 1]");
  }

  /// Linear anneal over the first decay fraction of episodes, then constant.
  double epsilon_at(std::int64_t episode) const {
    const double span = epsilon_decay_fraction * static_cast<double>(episodes);
    if (span <= 0.0) return epsilon_end;
    const double f = static_cast<double>(episode) / span;
    if (f >= 1.0) return epsilon_end;
    return epsilon_start + (epsilon_end - epsilon_start) * f;
  }

  /// Step size for the n-th backup (n >= 1) of one state-action pair.
  double alpha_at(std::uint64_t n) const {
    if (alpha_decay == 0.0) return alpha;
    return std::max(alpha, std::pow(static_cast<double>(n), -alpha_decay));
  }
};

/// Runs the full schedule. Episode e draws its user and dynamics from the
/// train-env stream e and its exploration from the agent stream e, so the
/// result is a pure function of (env, schedule, agent_salt).
inline QTable train(const EnvConfig& env, const TrainSchedule& schedule,
                    std::uint64_t agent_salt = kTrainAgentSalt) {
  env.check();
  schedule.check();
  QTable q;
  const int h = env.horizon;
  for (std::int64_t e = 0; e < schedule.episodes; ++e) {
    const auto idx = static_cast<std::uint64_t>(e);
    Stream env_rng(env.master_seed, kTrainEnvSalt, idx);
    Stream agent_rng(env.master_seed, agent_salt, idx);
    const double eps = schedule.epsilon_at(e);
    auto [s, theta] = reset(sample_user(env.population, env_rng));
    // Same arithmetic as select_epsilon_greedy + q_update, with one table
    // lookup per step: the successor's entry is the next step's entry.
    QTable::Entry* cur = &q.entry(s);
    for (int t = 0; t < h; ++t) {
      SourceAction a;
      if (agent_rng.uniform01() < eps)
        a = action_at(agent_rng.below(3));
      else
        a = argmax_action(cur->q);
      const StepResult r = step(s, theta, a, env_rng, env);
      const bool terminal = t + 1 == h;
      QTable::Entry* next = terminal ? nullptr : &q.entry(r.state);
      const double target =
          r.reward + (terminal ? 0.0 : env.gamma * std::max({next->q[0], next->q[1], next->q[2]}));
      const int i = index_of(a);
      const std::uint64_t n = ++cur->visits[i];
      cur->q[i] += schedule.alpha_at(n) * (target - cur->q[i]);
      s = r.state;
      theta = r.theta;
      cur = next;
    }
  }
  return q;
}

// Persistence. Written by hand so that large tables stream out quickly and
// numbers use the shortest round-trip form.

inline void write_qtable(std::ostream& os, const QTable& q) {
  char buf[64];
  auto num = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, res.ptr - buf);
  };
  os << "{\"format\":\"qtable-v1\",\"entries\":[";
  bool first = true;
  for (const auto& [s, e] : q.sorted_entries()) {
    os << (first ? "\n" : ",\n");
    first = false;
    const auto st = s.as_array();
    os << "{\"state\":[" << st[0];
    for (int i = 1; i < 6; ++i) os << ',' << st[i];
    os << "],\"q\":[";
    for (int i = 0; i < 3; ++i) {
      if (i) os << ',';
      num(e.q[i]);
    }
    os << "],\"visits\":[" << e.visits[0] << ',' << e.visits[1] << ',' << e.visits[2] << "]}";
  }
  os << "\n]}\n";
}

inline QTable qtable_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "qtable-v1") throw ConfigError("not a qtable-v1 document");
  QTable q;
  for (const auto& item : j.at("entries")) {
    const auto st = item.at("state").get<std::array<int, 6>>();
    RecState s{st[0], st[1], st[2], st[3], st[4], st[5]};
    if (!s.valid(kMaxHorizon)) throw ConfigError("qtable entry with invalid state");
    auto& e = q.entry(s);
    e.q = item.at("q").get<ActionValues>();
    e.visits = item.at("visits").get<std::array<std::uint64_t, 3>>();
  }
  return q;
}

}  // namespace tamperlab
