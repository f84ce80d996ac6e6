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

#include <cstdint>
#include <vector>

namespace dodge {

// Scalar used for policy inputs/outputs and training.
using Real = float;
using MatrixR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VectorR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// Outcome of one batched step. Columns index environments. Observations are
// those after any automatic reset; `final_critic_obs` holds the last
// observation of episodes that ended on this step.
struct VecStep {
  MatrixR actor_obs;
  MatrixR critic_obs;
  MatrixR final_critic_obs;
  VectorR reward;
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> truncated;
  // Completed episodes only (zero otherwise).
  std::vector<int> episode_length;
  std::vector<double> episode_return;
  std::vector<std::uint8_t> contact;
  std::vector<std::uint8_t> fall;
  std::vector<std::uint8_t> success;

  void resize(int actor_dim, int critic_dim, int num_envs);
};

class VecEnv {
 public:
  virtual ~VecEnv() = default;
  virtual int num_envs() const = 0;
  virtual int actor_dim() const = 0;
  virtual int critic_dim() const = 0;
  virtual int action_dim() const = 0;
  // Resets every environment; fills actor_obs/critic_obs.
  virtual void reset(VecStep& out) = 0;
  // actions: action_dim x num_envs.
  virtual void step(const MatrixR& actions, VecStep& out) = 0;
};

inline void VecStep::resize(int actor_dim, int critic_dim, int num_envs) {
  actor_obs.resize(actor_dim, num_envs);
  critic_obs.resize(critic_dim, num_envs);
  final_critic_obs.setZero(critic_dim, num_envs);
  reward.setZero(num_envs);
  terminated.assign(num_envs, 0);
  truncated.assign(num_envs, 0);
  episode_length.assign(num_envs, 0);
  episode_return.assign(num_envs, 0.0);
  contact.assign(num_envs, 0);
  fall.assign(num_envs, 0);
  success.assign(num_envs, 0);
}

}  // namespace dodge
