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

#pragma once

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <thread>
#include <vector>

#include "tamperlab/agents.hpp"
#include "tamperlab/env.hpp"
#include "tamperlab/rng.hpp"

namespace tamperlab {

/// FNV-1a, used to give each profile its own evaluation streams.
constexpr std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Plays one full episode against `profile` in the environment `env`.
inline EpisodeHistory run_episode(const Policy& policy, const UserProfile& profile,
                                  const EnvConfig& env, Stream& env_rng, Stream& agent_rng) {
  EpisodeHistory hist;
  hist.profile = profile.name;
  hist.records.reserve(static_cast<std::size_t>(env.horizon));
  auto [s, theta] = reset(profile);
  for (int t = 0; t < env.horizon; ++t) {
    const SourceAction a = policy.act(hist, t, agent_rng);
    const StepResult r = step(s, theta, a, env_rng, env);
    hist.append(a, r.reward, r.clicked);
    s = r.state;
    theta = r.theta;
  }
  return hist;
}

/// Evaluation episode `i` for a profile uses the same environment stream for
/// every policy, so policies are compared on aligned randomness.
inline EpisodeHistory run_eval_episode(const Policy& policy, const UserProfile& profile,
                                       const EnvConfig& env, std::uint64_t i) {
  const std::uint64_t tag = stable_hash(profile.name);
  Stream env_rng(env.master_seed, kEvalEnvSalt ^ tag, i);
  Stream agent_rng(env.master_seed, kEvalAgentSalt ^ tag, i);
  return run_episode(policy, profile, env, env_rng, agent_rng);
}

/// Runs `episodes` evaluation episodes, fanned out over worker threads.
/// The output is indexed by episode and does not depend on scheduling.
inline std::vector<EpisodeHistory> collect_episodes(const Policy& policy,
                                                    const UserProfile& profile,
                                                    std::int64_t episodes, const EnvConfig& env,
                                                    unsigned workers = 0) {
  std::vector<EpisodeHistory> out(static_cast<std::size_t>(std::max<std::int64_t>(episodes, 0)));
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(out.size(), 1)));
  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < out.size(); i += workers)
      out[i] = run_eval_episode(policy, profile, env, i);
  };
  if (workers == 1) {
    work(0);
    return out;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  return out;
}

}  // namespace tamperlab
