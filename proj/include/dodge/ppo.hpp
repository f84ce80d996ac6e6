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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dodge/policy.hpp"
#include "dodge/rng.hpp"
#include "dodge/vec_env.hpp"

namespace dodge {

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  bool lr_decay = false;
  int epochs = 5;
  int minibatches = 4;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  int horizon = 24;
  int num_envs = 256;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  bool operator==(const PpoConfig&) const = default;
};

// T x B transitions; sample (t, b) lives in column t * B + b.
struct RolloutBatch {
  int horizon = 0;
  int num_envs = 0;
  MatrixR actor_obs;
  MatrixR critic_obs;
  MatrixR actions;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  // Value of the true successor state (the final observation when the
  // episode ended on this step).
  Eigen::VectorXd next_values;
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> truncated;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  int size() const { return horizon * num_envs; }
  int index(int t, int b) const { return t * num_envs + b; }
};

struct RolloutStats {
  int episodes = 0;
  double sum_length = 0.0;
  double sum_return = 0.0;
  int successes = 0;
  int contacts = 0;
  int falls = 0;
  double mean_reward = 0.0;
};

// Stateful rollout source: keeps the environment's current observation
// between iterations.
class RolloutCollector {
 public:
  RolloutCollector(VecEnv& env, std::uint64_t seed, int workers = 1);

  RolloutBatch collect(const PolicyParams& params, int horizon,
                       RolloutStats* stats = nullptr);
  void set_workers(int workers) { workers_ = workers; }

 private:
  VecEnv& env_;
  VecStep current_;
  Rng rng_;
  int workers_ = 1;
};

// Fixed-size column chunks keep results independent of the worker count.
inline constexpr int kChunkColumns = 128;

MatrixR forward_chunked(const Mlp<Real>& net, const MatrixR& x, int workers);

// GAE(gamma, lambda); fills batch.advantages and batch.returns.
void compute_gae(RolloutBatch& batch, double gamma, double lambda);

struct AdamState {
  PolicyParams m;
  PolicyParams v;
  long step = 0;
};

AdamState make_adam_state(const PolicyParams& params);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
};

// Per-sample clipped surrogate objective min(rA, clip(r, 1-e, 1+e)A).
double clipped_objective(double ratio, double advantage, double clip);

// Loss and exact gradients of the PPO objective on the selected samples.
// `advantages` are the (already normalized) per-sample advantages.
struct LossResult {
  double total = 0.0;
  UpdateStats stats;
};
// Gathered minibatch columns in the scalar type of the network.
template <typename Scalar>
struct PpoSamples {
  using Matrix = typename Mlp<Scalar>::Matrix;
  Matrix actor_obs;
  Matrix critic_obs;
  Matrix actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  int size() const { return static_cast<int>(actions.cols()); }
};

struct LossSums {
  double policy = 0.0;
  double value = 0.0;
  double clipped = 0.0;
  double kl = 0.0;

  void add(const LossSums& o) {
    policy += o.policy;
    value += o.value;
    clipped += o.clipped;
    kl += o.kl;
  }
};

// Per-sample surrogate and value terms. Gradients of (sum / m) are added to
// *grad; the entropy bonus is left to finish_ppo_loss.
template <typename Scalar>
LossSums accumulate_ppo_terms(const ActorCritic<Scalar>& params,
                              const PpoSamples<Scalar>& s, double inv_m,
                              const PpoConfig& config,
                              ActorCritic<Scalar>* grad) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  using Vector = typename Mlp<Scalar>::Vector;
  const int len = s.size();
  const int n_act = params.action_dim();
  Eigen::Array<bool, Eigen::Dynamic, 1> active;
  const Vector std_dev = policy_std(params.log_std, &active);
  const Vector inv_var = std_dev.array().square().inverse().matrix();
  const double clip = config.clip;

  typename Mlp<Scalar>::Cache actor_cache, critic_cache;
  const Matrix mean = params.actor.forward(s.actor_obs, grad ? &actor_cache : nullptr);
  const Matrix value =
      params.critic.forward(s.critic_obs, grad ? &critic_cache : nullptr);
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> logp =
      log_prob<Scalar>(mean, std_dev, s.actions);

  LossSums sums;
  Matrix grad_mean(n_act, len);
  Matrix grad_value(1, len);
  Vector grad_log_std = Vector::Zero(n_act);
  for (int k = 0; k < len; ++k) {
    const double adv = s.advantages[k];
    const double log_ratio = static_cast<double>(logp[k]) - s.old_log_probs[k];
    const double ratio = std::exp(log_ratio);
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    sums.policy += -std::min(surr1, surr2);
    if (std::abs(ratio - 1.0) > clip) sums.clipped += 1.0;
    sums.kl += (ratio - 1.0) - log_ratio;
    // Gradient flows only through the unclipped branch.
    const Scalar d_logp =
        static_cast<Scalar>(surr1 <= surr2 ? -adv * inv_m * ratio : 0.0);
    const auto diff = (s.actions.col(k) - mean.col(k)).array();
    grad_mean.col(k) = (d_logp * diff * inv_var.array()).matrix();
    grad_log_std.array() +=
        d_logp * (diff.square() * inv_var.array() - Scalar(1));

    const double v_err = static_cast<double>(value(0, k)) - s.returns[k];
    sums.value += v_err * v_err;
    grad_value(0, k) = static_cast<Scalar>(config.value_coef * 2.0 * v_err * inv_m);
  }
  if (grad) {
    params.actor.backward(actor_cache, grad_mean, grad->actor);
    params.critic.backward(critic_cache, grad_value, grad->critic);
    grad->log_std.array() += grad_log_std.array() * active.template cast<Scalar>();
  }
  return sums;
}

// Turns accumulated sums into the total loss
// policy + c_v * value - c_e * entropy, adding the entropy gradient once.
template <typename Scalar>
LossResult finish_ppo_loss(const ActorCritic<Scalar>& params,
                           const LossSums& sums, double inv_m,
                           const PpoConfig& config, ActorCritic<Scalar>* grad) {
  Eigen::Array<bool, Eigen::Dynamic, 1> active;
  const auto std_dev = policy_std(params.log_std, &active);
  if (grad) {
    grad->log_std.array() -= static_cast<Scalar>(config.entropy_coef) *
                             active.template cast<Scalar>();
  }
  LossResult out;
  out.stats.policy_loss = sums.policy * inv_m;
  out.stats.value_loss = sums.value * inv_m;
  out.stats.entropy = static_cast<double>(gaussian_entropy<Scalar>(std_dev));
  out.stats.clip_fraction = sums.clipped * inv_m;
  out.stats.approx_kl = sums.kl * inv_m;
  out.total = out.stats.policy_loss + config.value_coef * out.stats.value_loss -
              config.entropy_coef * out.stats.entropy;
  return out;
}

// Unchunked loss over all samples; *grad is overwritten with the gradient.
template <typename Scalar>
LossResult ppo_loss(const ActorCritic<Scalar>& params,
                    const PpoSamples<Scalar>& samples, const PpoConfig& config,
                    ActorCritic<Scalar>* grad) {
  if (grad) {
    *grad = params;
    grad->set_zero();
  }
  const double inv_m = 1.0 / samples.size();
  const LossSums sums =
      accumulate_ppo_terms(params, samples, inv_m, config, grad);
  return finish_ppo_loss(params, sums, inv_m, config, grad);
}

// Chunked, parallel version over batch columns `indices`.
LossResult ppo_loss_and_grad(const PolicyParams& params,
                             const RolloutBatch& batch,
                             const Eigen::VectorXd& advantages,
                             const std::vector<int>& indices,
                             const PpoConfig& config, PolicyParams* grad,
                             int workers);

// Runs config.epochs passes of config.minibatches minibatches. Throws
// RuntimeFault when the loss turns non-finite.
UpdateStats ppo_update(const RolloutBatch& batch, PolicyParams& params,
                       AdamState& adam, const PpoConfig& config,
                       double learning_rate, Rng& rng, int workers);

struct IterationRecord {
  int iteration = 0;
  double mean_episode_length = 0.0;
  double mean_reward = 0.0;
  UpdateStats update;
  int episodes = 0;
  double success_rate = 0.0;
  double contact_rate = 0.0;
  double fall_rate = 0.0;
};

using IterationCallback =
    std::function<void(const IterationRecord&, const PolicyParams&)>;

struct TrainOutput {
  std::vector<IterationRecord> curve;
  PolicyParams params;
};

// Generic PPO loop over any vectorized environment.
TrainOutput train_ppo(VecEnv& env, const PpoConfig& config, std::uint64_t seed,
                      int iterations, int workers,
                      const IterationCallback& on_iteration = {});

// CSV header: iteration,mean_ep_len,mean_reward,policy_loss,value_loss,
// entropy,clip_frac,kl,episodes,success_rate,contact_rate,fall_rate.
void write_curve_header(std::ostream& os);
void write_curve_row(std::ostream& os, const IterationRecord& r);

}  // namespace dodge
