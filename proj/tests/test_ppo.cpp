// Copyright 2026 The Dodgeskin Authors
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

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "dodge/arena.hpp"
#include "dodge/ppo.hpp"
#include "dodge/reach.hpp"

namespace dodge {
namespace {

RolloutBatch single_env_batch(std::vector<double> rewards, std::vector<double> values,
                              std::vector<double> next_values,
                              std::vector<std::uint8_t> terminated = {},
                              std::vector<std::uint8_t> truncated = {}) {
  RolloutBatch b;
  b.horizon = static_cast<int>(rewards.size());
  b.num_envs = 1;
  b.rewards = Eigen::Map<Eigen::VectorXd>(rewards.data(), rewards.size());
  b.values = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
  b.next_values = Eigen::Map<Eigen::VectorXd>(next_values.data(), next_values.size());
  b.terminated = terminated.empty() ? std::vector<std::uint8_t>(b.horizon, 0) : terminated;
  b.truncated = truncated.empty() ? std::vector<std::uint8_t>(b.horizon, 0) : truncated;
  return b;
}

TEST(Gae, SingleStepBootstrap) {
  RolloutBatch b = single_env_batch({1.0}, {0.5}, {0.4});
  compute_gae(b, 0.99, 0.95);
  EXPECT_NEAR(b.advantages[0], 0.896, 1e-12);
  EXPECT_NEAR(b.returns[0], 1.396, 1e-12);
}

TEST(Gae, TerminalStep) {
  RolloutBatch b = single_env_batch({0.5}, {0.0}, {7.0}, {1});
  compute_gae(b, 0.99, 0.95);
  EXPECT_EQ(b.advantages[0], 0.5);
}

TEST(Gae, UndiscountedTwoSteps) {
  RolloutBatch b = single_env_batch({1, 1}, {0, 0}, {0, 0});
  compute_gae(b, 1.0, 1.0);
  EXPECT_EQ(b.advantages[0], 2.0);
  EXPECT_EQ(b.advantages[1], 1.0);
}

TEST(Gae, TruncationBootstrapsButDoesNotLeak) {
  // Episode boundary after step 0 (time limit); step 1 starts a new episode.
  RolloutBatch b = single_env_batch({1, 10}, {0, 0}, {3, 0}, {0, 0}, {1, 0});
  compute_gae(b, 0.5, 1.0);
  EXPECT_EQ(b.advantages[0], 1.0 + 0.5 * 3.0);
  EXPECT_EQ(b.advantages[1], 10.0);
}

// Discounted return computed directly from the definition.
double brute_return(const RolloutBatch& b, int env, int t, double gamma) {
  double g = 0.0, discount = 1.0;
  for (int k = t; k < b.horizon; ++k) {
    const int i = b.index(k, env);
    g += discount * b.rewards[i];
    discount *= gamma;
    if (b.terminated[i]) return g;
    if (b.truncated[i] || k == b.horizon - 1) return g + discount * b.next_values[i];
  }
  return g;
}

TEST(Gae, LambdaOneMatchesBruteForceReturns) {
  Rng rng(derive_seed(2, 0));
  for (int trial = 0; trial < 20; ++trial) {
    RolloutBatch b;
    b.horizon = 100;
    b.num_envs = 3;
    const int n = b.size();
    b.rewards.resize(n);
    b.values.resize(n);
    b.next_values.resize(n);
    b.terminated.assign(n, 0);
    b.truncated.assign(n, 0);
    for (int i = 0; i < n; ++i) {
      b.rewards[i] = uniform(rng, -1, 2);
      b.values[i] = uniform(rng, -5, 5);
      b.next_values[i] = uniform(rng, -5, 5);
      const double u = uniform(rng, 0, 1);
      if (u < 0.04) b.terminated[i] = 1;
      else if (u < 0.07) b.truncated[i] = 1;
    }
    // Inside an episode the bootstrap value is the next state's value, as in
    // a real rollout.
    for (int env = 0; env < b.num_envs; ++env) {
      for (int t = 0; t + 1 < b.horizon; ++t) {
        const int i = b.index(t, env);
        if (!b.terminated[i] && !b.truncated[i]) b.next_values[i] = b.values[b.index(t + 1, env)];
      }
    }
    const double gamma = uniform(rng, 0.9, 1.0);
    compute_gae(b, gamma, 1.0);
    for (int env = 0; env < b.num_envs; ++env) {
      for (int t = 0; t < b.horizon; ++t) {
        const int i = b.index(t, env);
        EXPECT_NEAR(b.advantages[i] + b.values[i], brute_return(b, env, t, gamma), 1e-9);
        EXPECT_NEAR(b.returns[i], brute_return(b, env, t, gamma), 1e-9);
      }
    }
  }
}

TEST(Clip, Examples) {
  EXPECT_NEAR(clipped_objective(1.5, 1.0, 0.2), 1.2, 1e-15);
  EXPECT_NEAR(clipped_objective(0.5, -1.0, 0.2), -0.8, 1e-15);
  EXPECT_EQ(clipped_objective(1.1, 1.0, 0.2), 1.1);
  EXPECT_EQ(clipped_objective(1.5, -1.0, 0.2), -1.5);
}

PpoSamples<double> on_policy_samples(const ActorCritic<double>& ac, int m, Rng& rng) {
  PpoSamples<double> s;
  s.actor_obs = Eigen::MatrixXd::Random(ac.actor_dim(), m);
  s.critic_obs = Eigen::MatrixXd::Random(ac.critic_dim(), m);
  const ActorOutput<double> out = actor_forward(ac, s.actor_obs);
  const ActionSample<double> a = sample_and_logprob<double>(out.mean, out.std_dev, rng);
  s.actions = a.action;
  s.old_log_probs = a.log_prob.transpose();
  s.advantages.resize(m);
  for (int k = 0; k < m; ++k) s.advantages[k] = uniform(rng, -1, 3);
  s.advantages = (s.advantages.array() - s.advantages.mean()).matrix();
  s.advantages /= std::sqrt(s.advantages.squaredNorm() / m);
  s.returns = Eigen::VectorXd::Zero(m);
  return s;
}

TEST(PpoLoss, UnchangedPolicyHasZeroSurrogate) {
  Rng rng(derive_seed(2, 1));
  const auto ac = make_actor_critic<double>(5, 5, 3, 8);
  const PpoSamples<double> s = on_policy_samples(ac, 200, rng);
  const LossResult r = ppo_loss<double>(ac, s, PpoConfig{}, nullptr);
  EXPECT_NEAR(r.stats.policy_loss, 0.0, 1e-12);
  EXPECT_EQ(r.stats.clip_fraction, 0.0);
  EXPECT_NEAR(r.stats.approx_kl, 0.0, 1e-12);
  EXPECT_NEAR(r.stats.entropy, gaussian_entropy<double>(policy_std(ac.log_std)), 1e-12);
}

TEST(PpoLoss, ClipFractionBounded) {
  Rng rng(derive_seed(2, 2));
  const auto ac = make_actor_critic<double>(5, 5, 3, 8);
  PpoSamples<double> s = on_policy_samples(ac, 200, rng);
  for (int k = 0; k < s.size(); ++k) s.old_log_probs[k] += uniform(rng, -1, 1);
  const LossResult r = ppo_loss<double>(ac, s, PpoConfig{}, nullptr);
  EXPECT_GT(r.stats.clip_fraction, 0.0);
  EXPECT_LE(r.stats.clip_fraction, 1.0);
}

std::vector<Real> flatten(const PolicyParams& p) {
  std::vector<Real> out;
  p.for_each_block([&](const Real* x, Eigen::Index n) { out.insert(out.end(), x, x + n); });
  return out;
}

TEST(PpoUpdate, ZeroLearningRateLeavesParamsBitwise) {
  ReachVecEnv env(ReachConfig{}, 32, 1);
  PolicyParams params = make_actor_critic<Real>(2, 2, 1, 3);
  RolloutCollector collector(env, 4);
  RolloutBatch batch = collector.collect(params, 16);
  compute_gae(batch, 0.99, 0.95);
  const auto before = flatten(params);
  AdamState adam = make_adam_state(params);
  Rng rng(5);
  const UpdateStats st = ppo_update(batch, params, adam, PpoConfig{}, 0.0, rng, 1);
  EXPECT_EQ(flatten(params), before);
  EXPECT_GT(st.grad_norm, 0.0);
}

TEST(Rollout, ShapesAndStoredLogProbs) {
  auto env = std::make_shared<const DodgeEnv>(default_robot_model(), SensorNetConfig{},
                                              EnvConfig{});
  BatchedDodgeEnv batched(env, 256, 6);
  const PolicyParams params =
      make_actor_critic<Real>(env->actor_dim(), env->critic_dim(), env->num_actions(), 2);
  RolloutCollector collector(batched, 7);
  const RolloutBatch b = collector.collect(params, 24);
  EXPECT_EQ(b.horizon, 24);
  EXPECT_EQ(b.num_envs, 256);
  EXPECT_EQ(b.actor_obs.rows(), env->actor_dim());
  EXPECT_EQ(b.actor_obs.cols(), 24 * 256);
  EXPECT_EQ(b.critic_obs.rows(), env->critic_dim());
  EXPECT_EQ(b.actions.rows(), 21);
  EXPECT_EQ(b.rewards.size(), 24 * 256);
  const ActorOutput<Real> out = actor_forward(params, b.actor_obs);
  const auto lp = log_prob<Real>(out.mean, out.std_dev, b.actions);
  for (int i = 0; i < b.size(); ++i) {
    EXPECT_NEAR(b.log_probs[i], lp[i], 1e-6 * std::max(1.0, std::abs(b.log_probs[i])));
  }
}

// Every episode ends on its first step; observations carry the step count.
class OneStepEnv : public VecEnv {
 public:
  explicit OneStepEnv(int n) : steps_(n, 0) {}
  int num_envs() const override { return static_cast<int>(steps_.size()); }
  int actor_dim() const override { return 1; }
  int critic_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  void reset(VecStep& out) override {
    out.resize(1, 1, num_envs());
    std::fill(steps_.begin(), steps_.end(), 0);
    out.actor_obs.setZero();
    out.critic_obs.setZero();
  }
  void step(const MatrixR&, VecStep& out) override {
    out.resize(1, 1, num_envs());
    for (int i = 0; i < num_envs(); ++i) {
      out.reward[i] = static_cast<Real>(steps_[i]);  // 0 for a fresh episode
      out.terminated[i] = 1;
      out.episode_length[i] = 1;
      steps_[i] = 0;  // auto-reset
      out.actor_obs(0, i) = out.critic_obs(0, i) = static_cast<Real>(steps_[i]);
    }
  }

 private:
  std::vector<int> steps_;
};

TEST(Rollout, AutoResetEveryStep) {
  OneStepEnv env(8);
  const PolicyParams params = make_actor_critic<Real>(1, 1, 1, 1);
  RolloutCollector collector(env, 3);
  RolloutStats stats;
  RolloutBatch b = collector.collect(params, 10, &stats);
  EXPECT_TRUE(b.rewards.isZero(0.0));
  EXPECT_TRUE(b.actor_obs.isZero(0.0));
  EXPECT_EQ(stats.episodes, 80);
  EXPECT_EQ(stats.sum_length, 80);
  compute_gae(b, 0.99, 0.95);
  for (int i = 0; i < b.size(); ++i) EXPECT_EQ(b.advantages[i], -b.values[i]);
}

std::vector<double> reach_curve(int workers) {
  ReachVecEnv env(ReachConfig{}, 64, 11);
  PpoConfig cfg;
  cfg.horizon = 50;
  cfg.num_envs = 64;
  const TrainOutput out = train_ppo(env, cfg, 21, 6, workers);
  std::vector<double> curve;
  for (const IterationRecord& r : out.curve) {
    curve.push_back(r.mean_reward);
    curve.push_back(r.update.policy_loss);
    curve.push_back(r.update.value_loss);
  }
  for (Real x : flatten(out.params)) curve.push_back(x);
  return curve;
}

TEST(Train, DeterministicAcrossRunsAndWorkers) {
  const auto a = reach_curve(1);
  EXPECT_EQ(a, reach_curve(1));
  EXPECT_EQ(a, reach_curve(3));
}

TEST(Train, ReachImprovesQuickly) {
  ReachConfig rc;
  ReachVecEnv env(rc, 128, 1);
  PpoConfig cfg;
  cfg.horizon = 50;
  cfg.num_envs = 128;
  cfg.learning_rate = 3e-3;
  const auto starts = reach_eval_starts(rc, 21);
  const PolicyParams init = make_actor_critic<Real>(2, 2, 1, derive_seed(5, 2));
  const TrainOutput out = train_ppo(env, cfg, 5, 40, 1);
  EXPECT_GT(reach_policy_return(rc, out.params, starts),
            reach_policy_return(rc, init, starts));
}

TEST(Config, Validation) {
  PpoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.clip = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PpoConfig{};
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace dodge
