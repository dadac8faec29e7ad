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

#include "tamperlab/env.hpp"

#include <gtest/gtest.h>

#include <deque>
#include <map>

#include "tamperlab/rng.hpp"

namespace tamperlab {
namespace {

// Replays fixed uniforms; fails loudly if a test consumes more than it scripted.
class ScriptedRng {
 public:
  explicit ScriptedRng(std::deque<double> u) : u_(std::move(u)) {}
  double uniform01() {
    EXPECT_FALSE(u_.empty()) << "scripted stream exhausted";
    if (u_.empty()) return 0.0;
    const double v = u_.front();
    u_.pop_front();
    return v;
  }
  int below(int n) { return static_cast<int>(uniform01() * n); }
  std::size_t remaining() const { return u_.size(); }

 private:
  std::deque<double> u_;
};

const UserTheta kModerateLeft{0.3, 0.25, 0.1};
const UserTheta kStrongRight{0.1, 0.1, 0.4};

TEST(Transition, SuccessorsFromStart) {
  const auto succ = transition_successors({}, SourceAction::kCentre, kModerateLeft, 30);
  EXPECT_EQ(succ[0].first, (RecState{0, 0, 1, 1, 0, 0}));
  EXPECT_DOUBLE_EQ(succ[0].second, 0.25);
  EXPECT_EQ(succ[1].first, (RecState{0, 0, 1, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(succ[1].second, 0.75);
}

TEST(Transition, ProbabilitiesSumToOne) {
  for (auto a : kAllActions) {
    const auto succ = transition_successors({2, 1, 0, 0, 3, 1}, a, {0.37, 0.12, 0.75}, 30);
    EXPECT_DOUBLE_EQ(succ[0].second + succ[1].second, 1.0);
  }
}

TEST(Transition, ExhaustedEpisodeThrows) {
  EXPECT_THROW(transition_successors({10, 3, 10, 2, 10, 1}, SourceAction::kLeft, kModerateLeft, 30),
               EpisodeOver);
}

TEST(Reward, CountsOneClick) {
  EXPECT_EQ(reward({1, 0, 0, 0, 0, 0}, {2, 1, 0, 0, 0, 0}), 1);
  EXPECT_EQ(reward({1, 0, 0, 0, 0, 0}, {1, 0, 1, 0, 0, 0}), 0);
}

TEST(Wing, StrictDominance) {
  EXPECT_EQ(classify_wing({0.4, 0.1, 0.1}), Wing::kLeftWing);
  EXPECT_EQ(classify_wing({0.1, 0.1, 0.4}), Wing::kRightWing);
  EXPECT_EQ(classify_wing({0.2, 0.4, 0.2}), Wing::kNeither);
  EXPECT_EQ(classify_wing({0.3, 0.1, 0.3}), Wing::kNeither);
  EXPECT_EQ(classify_wing({0.35, 0.05, 0.2}), Wing::kLeftWing);
}

TEST(Polarisation, OpposingRecommendationBoostsOwnWing) {
  const PolarisationConfig cfg;
  const auto t = apply_polarisation({0.1, 0.1, 0.4}, Wing::kRightWing, SourceAction::kLeft, 1.05, cfg);
  EXPECT_NEAR(t.theta_r, 0.42, 1e-12);
  EXPECT_DOUBLE_EQ(t.theta_l, 0.1);
  EXPECT_DOUBLE_EQ(t.theta_c, 0.1);
}

TEST(Polarisation, CappedAtThetaCap) {
  const auto t = apply_polarisation({0.1, 0.1, 0.74}, Wing::kRightWing, SourceAction::kLeft, 1.10,
                                    PolarisationConfig{});
  EXPECT_DOUBLE_EQ(t.theta_r, 0.75);
}

TEST(Polarisation, NoEffectOnCentristOrOwnSide) {
  const PolarisationConfig cfg;
  const UserTheta centrist{0.2, 0.4, 0.2};
  for (auto a : kAllActions)
    EXPECT_EQ(apply_polarisation(centrist, Wing::kNeither, a, 1.1, cfg), centrist);
  EXPECT_EQ(apply_polarisation(kStrongRight, Wing::kRightWing, SourceAction::kRight, 1.1, cfg),
            kStrongRight);
  EXPECT_EQ(apply_polarisation(kStrongRight, Wing::kRightWing, SourceAction::kCentre, 1.1, cfg),
            kStrongRight);
}

TEST(Polarisation, DisabledIsIdentity) {
  PolarisationConfig cfg;
  cfg.enabled = false;
  EXPECT_EQ(apply_polarisation(kModerateLeft, Wing::kLeftWing, SourceAction::kRight, 1.1, cfg),
            kModerateLeft);
}

TEST(Step, ScriptedClickAndBoost) {
  EnvConfig cfg = default_env_config();
  ScriptedRng rng({0.05, 0.5});  // click, then p = 1.055
  const auto r = step(RecState{}, kStrongRight, SourceAction::kLeft, rng, cfg);
  EXPECT_TRUE(r.clicked);
  EXPECT_EQ(r.reward, 1);
  EXPECT_EQ(r.state, (RecState{1, 1, 0, 0, 0, 0}));
  EXPECT_NEAR(r.theta.theta_r, 0.4 * 1.055, 1e-12);
  EXPECT_EQ(rng.remaining(), 0U);
}

TEST(Step, OwnWingClickLeavesThetaAlone) {
  EnvConfig cfg = default_env_config();
  const UserTheta strong_left{0.4, 0.1, 0.1};
  ScriptedRng rng({0.1, 0.9});
  const auto r = step(RecState{}, strong_left, SourceAction::kLeft, rng, cfg);
  EXPECT_TRUE(r.clicked);
  EXPECT_EQ(r.reward, 1);
  EXPECT_EQ(r.theta, strong_left);
}

TEST(Step, OpposingMissAtTopFactor) {
  EnvConfig cfg = default_env_config();
  cfg.polarisation.p_min = cfg.polarisation.p_max = 1.10;
  const UserTheta strong_left{0.4, 0.1, 0.1};
  ScriptedRng rng({0.5, 0.3});
  const auto r = step(RecState{}, strong_left, SourceAction::kRight, rng, cfg);
  EXPECT_FALSE(r.clicked);
  EXPECT_EQ(r.state, (RecState{0, 0, 0, 0, 1, 0}));
  EXPECT_NEAR(r.theta.theta_l, 0.44, 1e-12);
}

TEST(Step, ScriptedMissStillConsumesFactor) {
  EnvConfig cfg = default_env_config();
  ScriptedRng rng({0.99, 0.0});
  const auto r = step(RecState{}, kModerateLeft, SourceAction::kCentre, rng, cfg);
  EXPECT_FALSE(r.clicked);
  EXPECT_EQ(r.reward, 0);
  EXPECT_EQ(r.state, (RecState{0, 0, 1, 0, 0, 0}));
  EXPECT_EQ(r.theta, kModerateLeft);
  EXPECT_EQ(rng.remaining(), 0U);
}

TEST(Step, ClickBoundaryIsStrict) {
  EnvConfig cfg = default_env_config();
  ScriptedRng rng({0.3, 0.0});
  EXPECT_FALSE(step(RecState{}, kModerateLeft, SourceAction::kLeft, rng, cfg).clicked);
}

TEST(Step, PastHorizonThrows) {
  EnvConfig cfg = default_env_config();
  cfg.horizon = 2;
  ScriptedRng rng({});
  EXPECT_THROW(step(RecState{1, 0, 1, 0, 0, 0}, kModerateLeft, SourceAction::kLeft, rng, cfg),
               EpisodeOver);
}

TEST(Step, EmpiricalClickRate) {
  EnvConfig cfg = default_env_config();
  Stream rng(1234, 1, 0);
  const int n = 200'000;
  int clicks = 0;
  for (int i = 0; i < n; ++i)
    clicks += step(RecState{}, {0.4, 0.1, 0.1}, SourceAction::kLeft, rng, cfg).reward;
  EXPECT_NEAR(static_cast<double>(clicks) / n, 0.4, 0.005);
}

TEST(Users, SamplingIsUniform) {
  const auto pop = default_population();
  Stream rng(99, 2, 0);
  const int n = 500'000;
  std::map<std::string, int> counts;
  for (int i = 0; i < n; ++i) ++counts[sample_user(pop, rng).name];
  ASSERT_EQ(counts.size(), 5U);
  for (const auto& [name, c] : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.2, 0.002) << name;
}

TEST(Users, PopulationsHaveExpectedWings) {
  const std::map<std::string, Wing> expected = {
      {"strong-left", Wing::kLeftWing},         {"moderate-left", Wing::kLeftWing},
      {"centrist", Wing::kNeither},             {"moderate-right", Wing::kRightWing},
      {"strong-right", Wing::kRightWing},       {"extremely-left", Wing::kLeftWing},
      {"extremely-right", Wing::kRightWing},    {"left-anti-centrist", Wing::kLeftWing},
      {"right-anti-centrist", Wing::kRightWing}};
  auto all = default_population();
  for (const auto& p : unseen_population()) all.push_back(p);
  for (const auto& p : all) EXPECT_EQ(classify_wing(p.theta0), expected.at(p.name)) << p.name;
}

TEST(Invariants, FuzzedTrajectoriesKeepWingAndBounds) {
  EnvConfig cfg = default_env_config();
  auto all = default_population();
  for (const auto& p : unseen_population()) all.push_back(p);
  for (std::uint64_t ep = 0; ep < 5000; ++ep) {
    Stream rng(7, 3, ep);
    const auto& user = all[ep % all.size()];
    auto [s, theta] = reset(user);
    const Wing w0 = classify_wing(theta);
    for (int t = 0; t < cfg.horizon; ++t) {
      const auto a = action_at(rng.below(3));
      const auto prev = theta;
      const auto r = step(s, theta, a, rng, cfg);
      ASSERT_TRUE(r.state.valid(cfg.horizon));
      ASSERT_EQ(r.state.total_recommendations(), t + 1);
      ASSERT_TRUE(r.theta.valid(cfg.polarisation.theta_cap));
      ASSERT_EQ(classify_wing(r.theta), w0);
      for (auto b : kAllActions) ASSERT_GE(r.theta[b], prev[b]);
      s = r.state;
      theta = r.theta;
    }
  }
}

TEST(Invariants, SameSeedSameTrajectory) {
  EnvConfig cfg = default_env_config();
  auto run = [&] {
    Stream rng(42, 5, 17);
    auto [s, theta] = reset(default_population()[1]);
    std::vector<RecState> out;
    for (int t = 0; t < cfg.horizon; ++t) {
      const auto r = step(s, theta, action_at(t % 3), rng, cfg);
      s = r.state;
      theta = r.theta;
      out.push_back(s);
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(RecStatePacking, RoundTrip) {
  const RecState s{30, 12, 7, 3, 255, 200};
  EXPECT_EQ(RecState::unpack(s.pack()), s);
}

TEST(Config, Validation) {
  EnvConfig cfg = default_env_config();
  EXPECT_NO_THROW(cfg.check());
  cfg.horizon = 0;
  EXPECT_THROW(cfg.check(), ConfigError);
  cfg = default_env_config();
  cfg.polarisation.p_min = 1.0;
  EXPECT_THROW(cfg.check(), ConfigError);
  cfg = default_env_config();
  cfg.population.push_back({"bad", {0.8, 0.1, 0.1}});
  EXPECT_THROW(cfg.check(), ConfigError);
  cfg = default_env_config();
  cfg.population.clear();
  EXPECT_THROW(cfg.check(), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  EnvConfig cfg = default_env_config();
  cfg.master_seed = 777;
  cfg.horizon = 12;
  cfg.polarisation.enabled = false;
  const nlohmann::json j = cfg;
  const auto back = j.get<EnvConfig>();
  EXPECT_EQ(back.horizon, 12);
  EXPECT_EQ(back.master_seed, 777U);
  EXPECT_FALSE(back.polarisation.enabled);
  ASSERT_EQ(back.population.size(), 5U);
  EXPECT_EQ(back.population[3].name, "moderate-right");
  EXPECT_EQ(back.population[3].theta0, (UserTheta{0.1, 0.25, 0.3}));
  EXPECT_EQ(nlohmann::json(back), j);
}

TEST(Config, JsonRejectsBadTheta) {
  auto j = nlohmann::json::parse(R"({"population":[{"name":"x","theta0":[0.1,0.2]}]})");
  EXPECT_THROW(j.get<EnvConfig>(), ConfigError);
}

}  // namespace
}  // namespace tamperlab
