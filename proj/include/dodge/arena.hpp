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
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dodge/ball.hpp"
#include "dodge/rng.hpp"
#include "dodge/robot.hpp"
#include "dodge/sensors.hpp"
#include "dodge/vec_env.hpp"

namespace dodge {

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Range&) const = default;
};

struct RewardWeights {
  double alive = 1.0;
  double energy = 0.001;
  double posture = 0.05;
  double drift = 0.5;
  double action_rate = 0.01;
  bool operator==(const RewardWeights&) const = default;
};

struct EnvConfig {
  double dt_control = 0.02;
  int substeps = 4;
  Range spawn_distance{4.0, 6.0};
  Range spawn_height{2.0, 3.0};
  Range speed{4.0, 8.0};
  Range throw_interval{1.0, 2.0};
  double success_time = 3.0;
  double gravity = kGravity;
  double cull_distance = 8.0;
  double ball_radius = kDefaultBallRadius;
  int max_balls = 4;
  double action_scale = 0.5;
  double joint_noise = 0.05;
  std::string aim_link = "chest";
  double aim_radius = 0.4;
  // Launch along the speed-s trajectory that passes through the aim point
  // (falls back to the longest-reaching lob when out of reach). When false
  // the initial velocity points straight at the aim point.
  bool ballistic_aim = true;
  RewardWeights weights;

  int max_steps() const;
  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

struct Observation {
  Eigen::VectorXd actor;
  Eigen::VectorXd critic;
};

struct StepInfo {
  bool contact = false;
  bool fall = false;
  bool success = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

struct EpisodeState {
  RobotState robot;
  std::vector<Ball> balls;
  double time = 0.0;
  int steps = 0;
  double next_throw_time = 0.0;
  Eigen::VectorXd last_action;
  Rng rng;
  bool finished = false;
  double episode_return = 0.0;

  // Scratch reused across steps.
  LinkFrames frames;
  std::vector<Posed> sensor_poses;
};

Ball spawn_ball(Rng& rng, const Vec3d& aim_center, const Vec3d& robot_base,
                const EnvConfig& config);

Ball step_ball(const Ball& ball, double dt, double gravity = kGravity);

double compute_reward(const RobotState& state, const Eigen::VectorXd& action,
                      const Eigen::VectorXd& last_action,
                      const Eigen::VectorXd& torques, const RobotModel& model,
                      const EnvConfig& config);

// One dodgeball environment definition (robot, sensors, rules). Immutable
// and shared by every episode that runs on it.
class DodgeEnv {
 public:
  DodgeEnv(RobotModel model, SensorNetConfig sensors, EnvConfig config);

  const RobotModel& model() const { return model_; }
  const SensorNet& sensors() const { return sensors_; }
  const EnvConfig& config() const { return config_; }
  int num_actions() const { return model_.num_joints(); }
  int actor_dim() const;
  int critic_dim() const { return actor_dim() + 3; }

  EpisodeState reset(std::uint64_t seed) const;
  void reset(std::uint64_t seed, EpisodeState& ep) const;
  StepResult step(EpisodeState& ep, const Eigen::VectorXd& action) const;

  // Lower-level step used by the batched runner; writes observations
  // directly into the given columns.
  StepInfo step_into(EpisodeState& ep, const Eigen::Ref<const Eigen::VectorXd>& action,
                     double& reward, bool& terminated, bool& truncated) const;
  void observe(EpisodeState& ep, Eigen::Ref<Eigen::VectorXd> actor,
               Eigen::Ref<Eigen::VectorXd> critic) const;
  Observation observe(EpisodeState& ep) const;

  Vec3d aim_center(const LinkFrames& frames) const;

 private:
  RobotModel model_;
  SensorNet sensors_;
  EnvConfig config_;
  int aim_link_ = 0;
};

// B environments stepped in lockstep with automatic reset. Each slot owns a
// seed stream, so results do not depend on the worker count.
class BatchedDodgeEnv : public VecEnv {
 public:
  BatchedDodgeEnv(std::shared_ptr<const DodgeEnv> env, int num_envs,
                  std::uint64_t seed, int workers = 1);

  int num_envs() const override { return static_cast<int>(episodes_.size()); }
  int actor_dim() const override { return env_->actor_dim(); }
  int critic_dim() const override { return env_->critic_dim(); }
  int action_dim() const override { return env_->num_actions(); }
  void reset(VecStep& out) override;
  void step(const MatrixR& actions, VecStep& out) override;

  const EpisodeState& episode(int i) const { return episodes_[i]; }
  void set_workers(int workers) { workers_ = workers; }

 private:
  std::shared_ptr<const DodgeEnv> env_;
  std::vector<EpisodeState> episodes_;
  std::vector<Rng> seed_streams_;
  int workers_ = 1;
};

// Per-step world geometry for offline visualization.
struct ReplayFrame {
  int step = 0;
  double time = 0.0;
  std::vector<Ball> balls;
  std::vector<Capsuled> capsules;
};

ReplayFrame capture_frame(const DodgeEnv& env, EpisodeState& ep);

// CSV header: step,time,entity,id,ax,ay,az,bx,by,bz,radius. Balls use only
// the a-columns; link capsules use both endpoints.
void write_replay_csv(std::ostream& os, const RobotModel& model,
                      const std::vector<ReplayFrame>& frames);

}  // namespace dodge
