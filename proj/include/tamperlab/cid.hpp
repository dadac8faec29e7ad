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

// Causal influence diagrams: a typed DAG of decision, structural and utility
// nodes, builders for the media-recommendation diagrams and the graph queries
// used for incentive analysis (instrumental control incentives, tampering
// learnability and privacy).

#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tamperlab::cid {

enum class NodeKind { kDecision, kStructural, kUtility };
enum class EdgeKind { kCausal, kInformation };

// Symbol families used by the builders. Ids are "<family>_<t>".
inline constexpr std::string_view kState = "S";
inline constexpr std::string_view kAction = "A";
inline constexpr std::string_view kReward = "R";
inline constexpr std::string_view kUserTheta = "thetaT";
inline constexpr std::string_view kRewardTheta = "thetaR";
inline constexpr std::string_view kObservation = "O";
inline constexpr std::string_view kModelTheta = "theta";

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::kDecision: return "decision";
    case NodeKind::kStructural: return "structural";
    case NodeKind::kUtility: return "utility";
  }
  return "?";
}

inline std::string_view to_string(EdgeKind k) {
  return k == EdgeKind::kCausal ? "causal" : "information";
}

inline std::string node_id(std::string_view family, int t) {
  return std::string(family) + "_" + std::to_string(t);
}

struct CidNode {
  std::string id;
  NodeKind kind;
  std::string family;
  int time_index = 0;
};

struct CidEdge {
  std::string from;
  std::string to;
  EdgeKind kind = EdgeKind::kCausal;
};

enum class ErrorKind { kCycleDetected, kDanglingEdge, kBadEdgeTarget, kDuplicateNode };

struct ValidationError {
  ErrorKind kind;
  std::string detail;
};

/// Thrown by queries that require a valid diagram.
class InvalidDiagram : public std::invalid_argument {
 public:
  explicit InvalidDiagram(ValidationError e)
      : std::invalid_argument(e.detail), error_(std::move(e)) {}
  const ValidationError& error() const { return error_; }

 private:
  ValidationError error_;
};

class InvalidHorizon : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Immutable once built. Construction does not validate; call validate().
class Cid {
 public:
  Cid() = default;
  Cid(std::vector<CidNode> nodes, std::vector<CidEdge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].id, i);
  }

  const std::vector<CidNode>& nodes() const { return nodes_; }
  const std::vector<CidEdge>& edges() const { return edges_; }

  const CidNode* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &nodes_[it->second];
  }

  bool has_edge(std::string_view from, std::string_view to,
                std::optional<EdgeKind> kind = std::nullopt) const {
    return std::any_of(edges_.begin(), edges_.end(), [&](const CidEdge& e) {
      return e.from == from && e.to == to && (!kind || e.kind == *kind);
    });
  }

  /// Causal children of `id`, sorted by id.
  std::vector<std::string> causal_children(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& e : edges_)
      if (e.kind == EdgeKind::kCausal && e.from == id) out.push_back(e.to);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::string> causal_parents(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& e : edges_)
      if (e.kind == EdgeKind::kCausal && e.to == id) out.push_back(e.from);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<CidNode> nodes_;
  std::vector<CidEdge> edges_;
  std::map<std::string, std::size_t> index_;
};

/// Checks the structural invariants. Returns the first violation found;
/// a cycle is reported as the node sequence that closes it.
inline std::optional<ValidationError> validate(const Cid& cid) {
  std::set<std::string> seen;
  for (const auto& n : cid.nodes()) {
    if (!seen.insert(n.id).second)
      return ValidationError{ErrorKind::kDuplicateNode, "duplicate node " + n.id};
  }
  for (const auto& e : cid.edges()) {
    const CidNode* from = cid.find(e.from);
    const CidNode* to = cid.find(e.to);
    if (from == nullptr || to == nullptr)
      return ValidationError{ErrorKind::kDanglingEdge,
                             "dangling edge " + e.from + " -> " + e.to};
    const bool to_decision = to->kind == NodeKind::kDecision;
    if ((e.kind == EdgeKind::kInformation) != to_decision)
      return ValidationError{ErrorKind::kBadEdgeTarget,
                             std::string(to_string(e.kind)) + " edge " + e.from +
                                 " -> " + e.to + " ends at a " +
                                 std::string(to_string(to->kind)) + " node"};
  }

  // Iterative DFS over both edge kinds; colour 1 = on stack.
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& e : cid.edges()) adj[e.from].push_back(e.to);
  std::map<std::string, int> colour;
  for (const auto& root : cid.nodes()) {
    if (colour[root.id] != 0) continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{root.id, 0}};
    colour[root.id] = 1;
    while (!stack.empty()) {
      auto& [id, next] = stack.back();
      const auto& children = adj[id];
      if (next == children.size()) {
        colour[id] = 2;
        stack.pop_back();
        continue;
      }
      const std::string child = children[next++];
      if (colour[child] == 1) {
        std::string cycle;
        auto it = std::find_if(stack.begin(), stack.end(),
                               [&](const auto& f) { return f.first == child; });
        for (; it != stack.end(); ++it) cycle += it->first + " -> ";
        return ValidationError{ErrorKind::kCycleDetected, "cycle " + cycle + child};
      }
      if (colour[child] == 0) {
        colour[child] = 1;
        stack.emplace_back(child, 0);
      }
    }
  }
  return std::nullopt;
}

inline void require_valid(const Cid& cid) {
  if (auto err = validate(cid)) throw InvalidDiagram(*err);
}

namespace detail {

class Builder {
 public:
  void node(std::string_view family, int t, NodeKind kind) {
    nodes_.push_back({node_id(family, t), kind, std::string(family), t});
  }
  void causal(std::string_view ff, int ft, std::string_view tf, int tt) {
    edges_.push_back({node_id(ff, ft), node_id(tf, tt), EdgeKind::kCausal});
  }
  void info(std::string_view ff, int ft, std::string_view tf, int tt) {
    edges_.push_back({node_id(ff, ft), node_id(tf, tt), EdgeKind::kInformation});
  }
  Cid build() && { return Cid(std::move(nodes_), std::move(edges_)); }

 private:
  std::vector<CidNode> nodes_;
  std::vector<CidEdge> edges_;
};

inline void check_horizon(int timesteps) {
  if (timesteps < 2)
    throw InvalidHorizon("diagram window needs at least 2 time-steps, got " +
                         std::to_string(timesteps));
}

// S/A chain with S_x -> A_x information edges and S,A -> S_{x+1} transitions.
inline void add_state_action_chain(Builder& b, int timesteps) {
  for (int x = 0; x < timesteps; ++x) {
    b.node(kState, x, NodeKind::kStructural);
    b.node(kAction, x, NodeKind::kDecision);
    b.info(kState, x, kAction, x);
    if (x + 1 < timesteps) {
      b.causal(kState, x, kState, x + 1);
      b.causal(kAction, x, kState, x + 1);
    }
  }
}

// theta^T_x -> S_{x+1}, A_x -> theta^T_{x+1}, theta^T_x -> theta^T_{x+1}.
inline void add_user_theta(Builder& b, int timesteps) {
  for (int x = 0; x < timesteps; ++x) {
    b.node(kUserTheta, x, NodeKind::kStructural);
    if (x + 1 < timesteps) {
      b.causal(kUserTheta, x, kState, x + 1);
      b.causal(kAction, x, kUserTheta, x + 1);
      b.causal(kUserTheta, x, kUserTheta, x + 1);
    }
  }
}

// Rewards compare consecutive states, so the last state has no reward.
inline void add_state_pair_rewards(Builder& b, int timesteps) {
  for (int x = 0; x + 1 < timesteps; ++x) {
    b.node(kReward, x, NodeKind::kUtility);
    b.causal(kState, x, kReward, x);
    b.causal(kState, x + 1, kReward, x);
  }
}

}  // namespace detail

/// S, A, R per step; reward R_x depends on S_x and S_{x+1}.
inline Cid build_naive_cid(int timesteps) {
  detail::check_horizon(timesteps);
  detail::Builder b;
  detail::add_state_action_chain(b, timesteps);
  detail::add_state_pair_rewards(b, timesteps);
  return std::move(b).build();
}

/// Naive diagram plus the hidden user variable driving transitions.
inline Cid build_extended_cid(int timesteps) {
  detail::check_horizon(timesteps);
  detail::Builder b;
  detail::add_state_action_chain(b, timesteps);
  detail::add_user_theta(b, timesteps);
  detail::add_state_pair_rewards(b, timesteps);
  return std::move(b).build();
}

/// Extended diagram where rewards are a function of an observation O_x with
/// its own hidden response variable thetaR. Since R_x no longer needs the
/// next state, every step (including the last) carries a reward.
inline Cid build_observation_cid(int timesteps) {
  detail::check_horizon(timesteps);
  detail::Builder b;
  detail::add_state_action_chain(b, timesteps);
  detail::add_user_theta(b, timesteps);
  for (int x = 0; x < timesteps; ++x) {
    b.node(kRewardTheta, x, NodeKind::kStructural);
    b.node(kObservation, x, NodeKind::kStructural);
    b.node(kReward, x, NodeKind::kUtility);
    b.causal(kState, x, kObservation, x);
    b.causal(kAction, x, kObservation, x);
    b.causal(kRewardTheta, x, kObservation, x);
    b.causal(kObservation, x, kReward, x);
    if (x + 1 < timesteps) {
      b.causal(kAction, x, kRewardTheta, x + 1);
      b.causal(kRewardTheta, x, kRewardTheta, x + 1);
    }
  }
  return std::move(b).build();
}

/// Reward-function tampering diagram: the agent's reward-parameter model
/// theta_t feeds the reward but never the next state.
inline Cid build_rf_tampering_cid(int timesteps) {
  detail::check_horizon(timesteps);
  detail::Builder b;
  detail::add_state_action_chain(b, timesteps);
  for (int x = 0; x < timesteps; ++x) {
    b.node(kModelTheta, x, NodeKind::kStructural);
    b.node(kReward, x, NodeKind::kUtility);
    b.causal(kState, x, kReward, x);
    b.causal(kModelTheta, x, kReward, x);
    if (x + 1 < timesteps) {
      b.causal(kAction, x, kModelTheta, x + 1);
      b.causal(kModelTheta, x, kModelTheta, x + 1);
    }
  }
  return std::move(b).build();
}

/// A structural node with an instrumental control incentive, plus a causal
/// decision -> node -> utility path witnessing it.
struct IciWitness {
  std::string node;
  std::vector<std::vector<std::string>> paths;
};

namespace detail {

// Shortest causal path from `start` to any node satisfying `goal`, walking
// children (forward) or parents (backward). Ties resolve by sorted id.
template <class Goal>
std::vector<std::string> bfs_path(const Cid& cid, const std::string& start,
                                  bool forward, Goal goal) {
  std::map<std::string, std::string> parent;
  std::deque<std::string> queue{start};
  parent[start] = start;
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    if (cur != start && goal(*cid.find(cur))) {
      std::vector<std::string> path{cur};
      while (cur != start) path.push_back(cur = parent[cur]);
      if (forward) std::reverse(path.begin(), path.end());
      return path;
    }
    for (const auto& next : forward ? cid.causal_children(cur) : cid.causal_parents(cur)) {
      if (parent.emplace(next, cur).second) queue.push_back(next);
    }
  }
  return {};
}

}  // namespace detail

/// Structural nodes lying strictly inside a causal path from a decision to a
/// utility node, sorted by id. In a DAG any decision ancestor and utility
/// descendant of X concatenate into such a path.
inline std::vector<IciWitness> find_ici_nodes(const Cid& cid) {
  require_valid(cid);
  std::vector<IciWitness> out;
  std::vector<const CidNode*> order;
  for (const auto& n : cid.nodes()) order.push_back(&n);
  std::sort(order.begin(), order.end(),
            [](const CidNode* a, const CidNode* b) { return a->id < b->id; });
  for (const CidNode* n : order) {
    if (n->kind != NodeKind::kStructural) continue;
    auto up = detail::bfs_path(cid, n->id, false, [](const CidNode& m) {
      return m.kind == NodeKind::kDecision;
    });
    if (up.empty()) continue;
    auto down = detail::bfs_path(cid, n->id, true, [](const CidNode& m) {
      return m.kind == NodeKind::kUtility;
    });
    if (down.empty()) continue;
    std::vector<std::string> path(up.begin(), up.end());
    path.insert(path.end(), down.begin() + 1, down.end());
    out.push_back({n->id, {std::move(path)}});
  }
  return out;
}

/// True iff some node of the user-theta family carries an ICI.
inline bool user_tampering_learnable(const Cid& cid) {
  const auto ici = find_ici_nodes(cid);
  return std::any_of(ici.begin(), ici.end(), [&](const IciWitness& w) {
    return cid.find(w.node)->family == kUserTheta;
  });
}

/// True iff no causal edge runs from `family`_t to S_{t+1}.
inline bool privacy_check(const Cid& cid, std::string_view family) {
  require_valid(cid);
  for (const auto& e : cid.edges()) {
    if (e.kind != EdgeKind::kCausal) continue;
    const CidNode* from = cid.find(e.from);
    const CidNode* to = cid.find(e.to);
    if (from->family == family && to->family == kState &&
        to->time_index == from->time_index + 1)
      return false;
  }
  return true;
}

/// One line per node and edge, sorted lexicographically.
inline std::string dump(const Cid& cid) {
  std::vector<std::string> lines;
  for (const auto& n : cid.nodes()) {
    std::ostringstream os;
    os << "node " << n.id << ' ' << to_string(n.kind) << ' ' << n.family << ' '
       << n.time_index;
    lines.push_back(os.str());
  }
  for (const auto& e : cid.edges())
    lines.push_back("edge " + e.from + " " + e.to + " " + std::string(to_string(e.kind)));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

/// Builder lookup by name: naive, extended, observation, rf-tampering.
inline std::optional<Cid> build_by_name(std::string_view name, int timesteps) {
  if (name == "naive") return build_naive_cid(timesteps);
  if (name == "extended") return build_extended_cid(timesteps);
  if (name == "observation") return build_observation_cid(timesteps);
  if (name == "rf-tampering") return build_rf_tampering_cid(timesteps);
  return std::nullopt;
}

}  // namespace tamperlab::cid
