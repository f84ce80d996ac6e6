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

#include "dodge/reach.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dodge/errors.hpp"

namespace dodge {

JointSpec ReachConfig::default_joint() {
  JointSpec j;
  j.name = "reach";
  j.q_min = -2.0;
  j.q_max = 2.0;
  return j;
}

namespace {

// Advances one control period toward `target_angle`.
void reach_dynamics(const ReachConfig& c, double target_angle, double& q,
                    double& qdot) {
  const JointSpec& j = c.joint;
  const double dt = c.dt_control / c.substeps;
  const double cmd = std::clamp(target_angle, j.q_min, j.q_max);
  for (int s = 0; s < c.substeps; ++s) {
    const double tau = std::clamp(j.kp * (cmd - q) - j.kd * qdot,
                                  -j.torque_limit, j.torque_limit);
    qdot += (tau - j.damping * qdot) / j.inertia * dt;
    q += qdot * dt;
    if (q < j.q_min) {
      q = j.q_min;
      qdot = 0;
    } else if (q > j.q_max) {
      q = j.q_max;
      qdot = 0;
    }
  }
}

// One deterministic episode from q0; the action comes from policy(q, qdot).
template <typename Policy>
double reach_episode_return(const ReachConfig& config, double q0,
                            Policy&& policy) {
  double q = q0;
  double qdot = 0.0;
  double ret = 0.0;
  for (int t = 0; t < config.episode_steps; ++t) {
    const double a = policy(q, qdot);
    reach_dynamics(config, config.action_scale * a, q, qdot);
    ret += -(q - config.target) * (q - config.target);
  }
  return ret;
}

}  // namespace

ReachVecEnv::ReachVecEnv(ReachConfig config, int num_envs, std::uint64_t seed)
    : config_(std::move(config)) {
  if (num_envs < 1) throw ConfigError("reach env: need at least one env");
  q_.assign(num_envs, 0.0);
  qdot_.assign(num_envs, 0.0);
  steps_.assign(num_envs, 0);
  returns_.assign(num_envs, 0.0);
  for (int i = 0; i < num_envs; ++i) rngs_.emplace_back(derive_seed(seed, i));
}

void ReachVecEnv::reset_one(int i) {
  q_[i] = uniform(rngs_[i], -config_.initial_spread, config_.initial_spread);
  qdot_[i] = 0.0;
  steps_[i] = 0;
  returns_[i] = 0.0;
}

void ReachVecEnv::write_obs(int i, VecStep& out) const {
  out.actor_obs(0, i) = static_cast<Real>(q_[i]);
  out.actor_obs(1, i) = static_cast<Real>(qdot_[i]);
  out.critic_obs.col(i) = out.actor_obs.col(i);
}

void ReachVecEnv::reset(VecStep& out) {
  out.resize(2, 2, num_envs());
  for (int i = 0; i < num_envs(); ++i) {
    reset_one(i);
    write_obs(i, out);
  }
}

void ReachVecEnv::step(const MatrixR& actions, VecStep& out) {
  if (actions.rows() != 1 || actions.cols() != num_envs()) {
    throw ConfigError("reach env: action shape mismatch");
  }
  out.resize(2, 2, num_envs());
  for (int i = 0; i < num_envs(); ++i) {
    reach_dynamics(config_, config_.action_scale * actions(0, i), q_[i],
                   qdot_[i]);
    const double err = q_[i] - config_.target;
    const double r = -err * err;
    out.reward[i] = static_cast<Real>(r);
    returns_[i] += r;
    steps_[i] += 1;
    write_obs(i, out);
    if (steps_[i] >= config_.episode_steps) {
      out.truncated[i] = 1;
      out.final_critic_obs.col(i) = out.critic_obs.col(i);
      out.episode_length[i] = steps_[i];
      out.episode_return[i] = returns_[i];
      out.success[i] = 1;
      reset_one(i);
      write_obs(i, out);
    }
  }
}

std::vector<double> reach_eval_starts(const ReachConfig& config, int count) {
  std::vector<double> starts(count);
  for (int i = 0; i < count; ++i) {
    starts[i] = count == 1 ? 0.0
                           : -config.initial_spread +
                                 2.0 * config.initial_spread * i / (count - 1);
  }
  return starts;
}

double reach_policy_return(const ReachConfig& config,
                           const PolicyParams& params,
                           const std::vector<double>& starts) {
  double total = 0.0;
  MatrixR obs(2, 1);
  for (double q0 : starts) {
    total += reach_episode_return(config, q0, [&](double q, double qdot) {
      obs(0, 0) = static_cast<Real>(q);
      obs(1, 0) = static_cast<Real>(qdot);
      return static_cast<double>(params.actor.forward(obs, nullptr)(0, 0));
    });
  }
  return total / starts.size();
}

double reach_oracle_return(const ReachConfig& config,
                           const std::vector<double>& starts) {
  // Best linear feedback law around the target over a dense gain grid; a
  // 32-unit tanh policy can represent every member of this family.
  const double target_cmd = config.target / config.action_scale;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 80; ++i) {
    const double k_pos = 0.25 * i;
    for (int k = 0; k <= 40; ++k) {
      const double k_vel = 0.025 * k;
      double total = 0.0;
      for (double q0 : starts) {
        total += reach_episode_return(config, q0, [&](double q, double qdot) {
          return target_cmd +
                 (k_pos * (config.target - q) - k_vel * qdot) /
                     config.action_scale;
        });
      }
      best = std::max(best, total / starts.size());
    }
  }
  return best;
}

double reach_constant_return(const ReachConfig& config, double action,
                             const std::vector<double>& starts) {
  double total = 0.0;
  for (double q0 : starts) {
    total += reach_episode_return(config, q0,
                                  [&](double, double) { return action; });
  }
  return total / starts.size();
}

}  // namespace dodge
