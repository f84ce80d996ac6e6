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

#include "dodge/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dodge/errors.hpp"
#include "dodge/parallel.hpp"

namespace dodge {

void PpoConfig::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("ppo: gamma in (0,1]");
  if (!(lambda > 0 && lambda <= 1)) throw ConfigError("ppo: lambda in (0,1]");
  if (!(clip > 0)) throw ConfigError("ppo: clip must be positive");
  if (!(learning_rate >= 0)) throw ConfigError("ppo: learning rate < 0");
  if (epochs < 1 || minibatches < 1 || horizon < 1 || num_envs < 1) {
    throw ConfigError("ppo: epochs, minibatches, horizon, envs must be >= 1");
  }
  if (minibatches > horizon * num_envs) {
    throw ConfigError("ppo: more minibatches than samples");
  }
  if (!(max_grad_norm > 0 && value_coef >= 0 && entropy_coef >= 0)) {
    throw ConfigError("ppo: invalid loss coefficients");
  }
}

MatrixR forward_chunked(const Mlp<Real>& net, const MatrixR& x, int workers) {
  const Eigen::Index n = x.cols();
  MatrixR out(net.output_dim(), n);
  const std::size_t chunks = (n + kChunkColumns - 1) / kChunkColumns;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunkColumns;
    const Eigen::Index len = std::min<Eigen::Index>(kChunkColumns, n - begin);
    out.middleCols(begin, len) = net.forward(x.middleCols(begin, len), nullptr);
  });
  return out;
}

RolloutCollector::RolloutCollector(VecEnv& env, std::uint64_t seed,
                                   int workers)
    : env_(env), rng_(seed), workers_(workers) {
  env_.reset(current_);
}

RolloutBatch RolloutCollector::collect(const PolicyParams& params, int horizon,
                                       RolloutStats* stats) {
  const int b_count = env_.num_envs();
  if (params.actor_dim() != env_.actor_dim() ||
      params.critic_dim() != env_.critic_dim() ||
      params.action_dim() != env_.action_dim()) {
    throw ConfigError("policy dimensions do not match the environment");
  }
  RolloutBatch batch;
  batch.horizon = horizon;
  batch.num_envs = b_count;
  const int n = horizon * b_count;
  batch.actor_obs.resize(env_.actor_dim(), n);
  batch.critic_obs.resize(env_.critic_dim(), n);
  batch.actions.resize(env_.action_dim(), n);
  batch.log_probs.resize(n);
  batch.rewards.resize(n);
  batch.values.resize(n);
  batch.next_values.resize(n);
  batch.terminated.assign(n, 0);
  batch.truncated.assign(n, 0);

  RolloutStats local;
  double reward_sum = 0.0;
  const VectorR std_dev = policy_std(params.log_std);
  MatrixR values = forward_chunked(params.critic, current_.critic_obs, workers_);
  VecStep next;
  for (int t = 0; t < horizon; ++t) {
    const MatrixR mean =
        forward_chunked(params.actor, current_.actor_obs, workers_);
    const ActionSample<Real> sample =
        sample_and_logprob<Real>(mean, std_dev, rng_);
    const int base = t * b_count;
    batch.actor_obs.middleCols(base, b_count) = current_.actor_obs;
    batch.critic_obs.middleCols(base, b_count) = current_.critic_obs;
    batch.actions.middleCols(base, b_count) = sample.action;
    for (int b = 0; b < b_count; ++b) {
      batch.log_probs[base + b] = sample.log_prob[b];
      batch.values[base + b] = values(0, b);
    }

    env_.step(sample.action, next);
    MatrixR next_values = forward_chunked(params.critic, next.critic_obs, workers_);

    std::vector<int> done_cols;
    for (int b = 0; b < b_count; ++b) {
      batch.rewards[base + b] = next.reward[b];
      reward_sum += next.reward[b];
      batch.terminated[base + b] = next.terminated[b];
      batch.truncated[base + b] = next.truncated[b];
      if (next.terminated[b] || next.truncated[b]) {
        done_cols.push_back(b);
        local.episodes += 1;
        local.sum_length += next.episode_length[b];
        local.sum_return += next.episode_return[b];
        local.successes += next.success[b];
        local.contacts += next.contact[b];
        local.falls += next.fall[b];
      } else {
        batch.next_values[base + b] = next_values(0, b);
      }
    }
    if (!done_cols.empty()) {
      MatrixR finals(env_.critic_dim(), done_cols.size());
      for (std::size_t k = 0; k < done_cols.size(); ++k) {
        finals.col(k) = next.final_critic_obs.col(done_cols[k]);
      }
      const MatrixR final_values =
          forward_chunked(params.critic, finals, workers_);
      for (std::size_t k = 0; k < done_cols.size(); ++k) {
        batch.next_values[base + done_cols[k]] = final_values(0, k);
      }
    }
    std::swap(current_, next);
    values = std::move(next_values);
  }
  local.mean_reward = reward_sum / n;
  if (stats) *stats = local;
  return batch;
}

void compute_gae(RolloutBatch& batch, double gamma, double lambda) {
  const int n = batch.size();
  batch.advantages.resize(n);
  batch.returns.resize(n);
  for (int b = 0; b < batch.num_envs; ++b) {
    double next_adv = 0.0;
    for (int t = batch.horizon - 1; t >= 0; --t) {
      const int i = batch.index(t, b);
      const double not_terminal = batch.terminated[i] ? 0.0 : 1.0;
      const double not_done =
          (batch.terminated[i] || batch.truncated[i]) ? 0.0 : 1.0;
      const double delta = batch.rewards[i] +
                           gamma * batch.next_values[i] * not_terminal -
                           batch.values[i];
      next_adv = delta + gamma * lambda * not_done * next_adv;
      batch.advantages[i] = next_adv;
      batch.returns[i] = next_adv + batch.values[i];
    }
  }
}

AdamState make_adam_state(const PolicyParams& params) {
  AdamState s{params, params, 0};
  s.m.set_zero();
  s.v.set_zero();
  return s;
}

double clipped_objective(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {


std::vector<std::pair<Real*, Eigen::Index>> blocks(PolicyParams& p) {
  std::vector<std::pair<Real*, Eigen::Index>> out;
  p.for_each_block([&](Real* d, Eigen::Index n) { out.emplace_back(d, n); });
  return out;
}

}  // namespace

LossResult ppo_loss_and_grad(const PolicyParams& params,
                             const RolloutBatch& batch,
                             const Eigen::VectorXd& advantages,
                             const std::vector<int>& indices,
                             const PpoConfig& config, PolicyParams* grad,
                             int workers) {
  const int m = static_cast<int>(indices.size());
  const double inv_m = 1.0 / m;
  const std::size_t chunks = (m + kChunkColumns - 1) / kChunkColumns;
  std::vector<LossSums> sums(chunks);
  std::vector<PolicyParams> grads(grad ? chunks : 0);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const int begin = static_cast<int>(c) * kChunkColumns;
    const int len = std::min(kChunkColumns, m - begin);
    PpoSamples<Real> s;
    s.actor_obs.resize(params.actor_dim(), len);
    s.critic_obs.resize(params.critic_dim(), len);
    s.actions.resize(params.action_dim(), len);
    s.old_log_probs.resize(len);
    s.advantages.resize(len);
    s.returns.resize(len);
    for (int k = 0; k < len; ++k) {
      const int i = indices[begin + k];
      s.actor_obs.col(k) = batch.actor_obs.col(i);
      s.critic_obs.col(k) = batch.critic_obs.col(i);
      s.actions.col(k) = batch.actions.col(i);
      s.old_log_probs[k] = batch.log_probs[i];
      s.advantages[k] = advantages[i];
      s.returns[k] = batch.returns[i];
    }
    PolicyParams* g = nullptr;
    if (grad) {
      grads[c] = params;
      grads[c].set_zero();
      g = &grads[c];
    }
    sums[c] = accumulate_ppo_terms(params, s, inv_m, config, g);
  });

  // Fixed-order reduction keeps results independent of the worker count.
  LossSums total;
  if (grad) {
    *grad = params;
    grad->set_zero();
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    total.add(sums[c]);
    if (grad) {
      auto dst = blocks(*grad);
      auto src = blocks(grads[c]);
      for (std::size_t k = 0; k < dst.size(); ++k) {
        Eigen::Map<VectorR>(dst[k].first, dst[k].second) +=
            Eigen::Map<const VectorR>(src[k].first, src[k].second);
      }
    }
  }
  return finish_ppo_loss(params, total, inv_m, config, grad);
}

UpdateStats ppo_update(const RolloutBatch& batch, PolicyParams& params,
                       AdamState& adam, const PpoConfig& config,
                       double learning_rate, Rng& rng, int workers) {
  const int n = batch.size();
  Eigen::VectorXd adv = batch.advantages;
  const double mean = adv.mean();
  const double var = (adv.array() - mean).square().mean();
  adv = (adv.array() - mean) / std::max(std::sqrt(var), 1e-8);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  UpdateStats sum;
  int updates = 0;
  PolicyParams grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int mb = 0; mb < config.minibatches; ++mb) {
      const int begin = n * mb / config.minibatches;
      const int end = n * (mb + 1) / config.minibatches;
      const std::vector<int> idx(order.begin() + begin, order.begin() + end);
      const LossResult loss =
          ppo_loss_and_grad(params, batch, adv, idx, config, &grad, workers);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss (epoch " << epoch << ", minibatch " << mb
            << "): policy=" << loss.stats.policy_loss
            << " value=" << loss.stats.value_loss
            << " entropy=" << loss.stats.entropy;
        throw RuntimeFault(msg.str());
      }
      double sq = 0.0;
      grad.for_each_block([&](const Real* p, Eigen::Index k) {
        for (Eigen::Index i = 0; i < k; ++i) sq += double(p[i]) * p[i];
      });
      const double norm = std::sqrt(sq);
      const double scale =
          norm > config.max_grad_norm ? config.max_grad_norm / norm : 1.0;

      adam.step += 1;
      const double b1 = config.adam_beta1;
      const double b2 = config.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, adam.step);
      const double c2 = 1.0 - std::pow(b2, adam.step);
      auto pb = blocks(params);
      auto gb = blocks(grad);
      auto mbk = blocks(adam.m);
      auto vb = blocks(adam.v);
      for (std::size_t k = 0; k < pb.size(); ++k) {
        for (Eigen::Index i = 0; i < pb[k].second; ++i) {
          const double g = scale * gb[k].first[i];
          const double m_new = b1 * mbk[k].first[i] + (1 - b1) * g;
          const double v_new = b2 * vb[k].first[i] + (1 - b2) * g * g;
          mbk[k].first[i] = static_cast<Real>(m_new);
          vb[k].first[i] = static_cast<Real>(v_new);
          const double step = learning_rate * (m_new / c1) /
                              (std::sqrt(v_new / c2) + config.adam_eps);
          pb[k].first[i] = static_cast<Real>(pb[k].first[i] - step);
        }
      }
      sum.policy_loss += loss.stats.policy_loss;
      sum.value_loss += loss.stats.value_loss;
      sum.entropy += loss.stats.entropy;
      sum.clip_fraction += loss.stats.clip_fraction;
      sum.approx_kl += loss.stats.approx_kl;
      sum.grad_norm += norm;
      ++updates;
    }
  }
  sum.policy_loss /= updates;
  sum.value_loss /= updates;
  sum.entropy /= updates;
  sum.clip_fraction /= updates;
  sum.approx_kl /= updates;
  sum.grad_norm /= updates;
  return sum;
}

TrainOutput train_ppo(VecEnv& env, const PpoConfig& config, std::uint64_t seed,
                      int iterations, int workers,
                      const IterationCallback& on_iteration) {
  config.validate();
  TrainOutput out;
  out.params = make_actor_critic<Real>(env.actor_dim(), env.critic_dim(),
                                       env.action_dim(), derive_seed(seed, 2));
  AdamState adam = make_adam_state(out.params);
  RolloutCollector collector(env, derive_seed(seed, 3), workers);
  Rng update_rng(derive_seed(seed, 4));
  double last_length = 0.0;
  for (int it = 0; it < iterations; ++it) {
    RolloutStats stats;
    RolloutBatch batch = collector.collect(out.params, config.horizon, &stats);
    compute_gae(batch, config.gamma, config.lambda);
    const double lr =
        config.lr_decay
            ? config.learning_rate * (1.0 - static_cast<double>(it) / iterations)
            : config.learning_rate;
    IterationRecord rec;
    rec.iteration = it;
    rec.update = ppo_update(batch, out.params, adam, config, lr, update_rng,
                            workers);
    if (stats.episodes > 0) last_length = stats.sum_length / stats.episodes;
    rec.mean_episode_length = last_length;
    rec.mean_reward = stats.mean_reward;
    rec.episodes = stats.episodes;
    if (stats.episodes > 0) {
      rec.success_rate = double(stats.successes) / stats.episodes;
      rec.contact_rate = double(stats.contacts) / stats.episodes;
      rec.fall_rate = double(stats.falls) / stats.episodes;
    }
    out.curve.push_back(rec);
    if (on_iteration) on_iteration(rec, out.params);
  }
  return out;
}

void write_curve_header(std::ostream& os) {
  os << "iteration,mean_ep_len,mean_reward,policy_loss,value_loss,entropy,"
        "clip_frac,kl,episodes,success_rate,contact_rate,fall_rate\n";
}

void write_curve_row(std::ostream& os, const IterationRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%.9g,%.9g,%.9g\n",
                r.iteration, r.mean_episode_length, r.mean_reward,
                r.update.policy_loss, r.update.value_loss, r.update.entropy,
                r.update.clip_fraction, r.update.approx_kl, r.episodes,
                r.success_rate, r.contact_rate, r.fall_rate);
  os << buf;
}

}  // namespace dodge
