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

#include <cstdint>
#include <vector>

#include "dodge/policy.hpp"
#include "dodge/robot.hpp"
#include "dodge/vec_env.hpp"

namespace dodge {

// Single PD-driven joint that must settle at a fixed angle. Reward per
// control step is -(q - q_target)^2; observation is (q, qdot).
struct ReachConfig {
  double target = 0.5;
  double initial_spread = 1.0;  // q0 ~ U[-spread, spread]
  int episode_steps = 50;
  double dt_control = 0.02;
  int substeps = 4;
  double action_scale = 1.0;
  JointSpec joint = default_joint();

  static JointSpec default_joint();
};

class ReachVecEnv : public VecEnv {
 public:
  ReachVecEnv(ReachConfig config, int num_envs, std::uint64_t seed);

  int num_envs() const override { return static_cast<int>(q_.size()); }
  int actor_dim() const override { return 2; }
  int critic_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  void reset(VecStep& out) override;
  void step(const MatrixR& actions, VecStep& out) override;

  const ReachConfig& config() const { return config_; }

 private:
  void reset_one(int i);
  void write_obs(int i, VecStep& out) const;

  ReachConfig config_;
  std::vector<double> q_;
  std::vector<double> qdot_;
  std::vector<int> steps_;
  std::vector<double> returns_;
  std::vector<Rng> rngs_;
};

// Mean return of the mean action of `params` over fixed start states.
double reach_policy_return(const ReachConfig& config,
                           const PolicyParams& params,
                           const std::vector<double>& starts);

// Best return over a family of feedback laws; the reference maximum.
double reach_oracle_return(const ReachConfig& config,
                           const std::vector<double>& starts);

// Return of a policy that always outputs `action`.
double reach_constant_return(const ReachConfig& config, double action,
                             const std::vector<double>& starts);

std::vector<double> reach_eval_starts(const ReachConfig& config, int count);

}  // namespace dodge
