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

#include "dodge/arena.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "dodge/errors.hpp"
#include "dodge/parallel.hpp"

namespace dodge {

int EnvConfig::max_steps() const {
  return static_cast<int>(std::lround(success_time / dt_control));
}

void EnvConfig::validate() const {
  auto check_range = [](const Range& r, const char* name) {
    if (!(r.lo > 0 && r.hi > r.lo)) {
      throw ConfigError(std::string("env: ") + name +
                        " must be a positive, non-degenerate interval");
    }
  };
  check_range(spawn_distance, "spawn_distance");
  check_range(spawn_height, "spawn_height");
  check_range(speed, "speed");
  check_range(throw_interval, "throw_interval");
  if (!(dt_control > 0 && substeps >= 1 && dt_control / substeps <= 0.02)) {
    throw ConfigError("env: control period and substeps are inconsistent");
  }
  if (!(success_time > 0 && gravity > 0 && cull_distance > 0 &&
        ball_radius > 0 && aim_radius > 0 && action_scale > 0 &&
        joint_noise >= 0 && max_balls >= 1)) {
    throw ConfigError("env: constants must be positive");
  }
  const RewardWeights& w = weights;
  if (w.alive < 0 || w.energy < 0 || w.posture < 0 || w.drift < 0 ||
      w.action_rate < 0) {
    throw ConfigError("env: reward weights must be non-negative");
  }
}

namespace {

// Launch velocity of speed `speed` whose ballistic arc passes through
// `target`, preferring the flatter of the two solutions.
Vec3d ballistic_velocity(const Vec3d& from, const Vec3d& target, double speed,
                         double g) {
  const Vec3d delta = target - from;
  const double s2 = speed * speed;
  // With u = T^2: (g^2/4) u^2 + (g dz - s^2) u + |delta|^2 = 0.
  const double b = s2 - g * delta.z();
  const double disc = b * b - g * g * delta.squaredNorm();
  double u;
  if (disc >= 0) {
    u = 2.0 * (b - std::sqrt(disc)) / (g * g);
  } else {
    u = 2.0 * b / (g * g);
  }
  const double t = std::sqrt(std::max(u, 1e-12));
  Vec3d v = delta / t + Vec3d(0, 0, 0.5 * g * t);
  if (disc < 0) v *= speed / v.norm();
  return v;
}

Vec3d uniform_in_ball(Rng& rng, double radius) {
  while (true) {
    const Vec3d p(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    if (p.squaredNorm() <= 1.0) return radius * p;
  }
}

}  // namespace

Ball spawn_ball(Rng& rng, const Vec3d& aim_center, const Vec3d& robot_base,
                const EnvConfig& config) {
  const double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double dist = uniform(rng, config.spawn_distance.lo,
                              config.spawn_distance.hi);
  const double height =
      uniform(rng, config.spawn_height.lo, config.spawn_height.hi);
  const double speed = uniform(rng, config.speed.lo, config.speed.hi);
  const Vec3d aim = aim_center + uniform_in_ball(rng, config.aim_radius);

  Ball ball;
  ball.radius = config.ball_radius;
  ball.position = Vec3d(robot_base.x() + dist * std::cos(heading),
                        robot_base.y() + dist * std::sin(heading), height);
  if (config.ballistic_aim) {
    ball.velocity =
        ballistic_velocity(ball.position, aim, speed, config.gravity);
  } else {
    ball.velocity = speed * (aim - ball.position).normalized();
  }
  return ball;
}

Ball step_ball(const Ball& ball, double dt, double gravity) {
  Ball out = ball;
  out.velocity.z() -= gravity * dt;
  out.position += out.velocity * dt;
  return out;
}

double compute_reward(const RobotState& state, const Eigen::VectorXd& action,
                      const Eigen::VectorXd& last_action,
                      const Eigen::VectorXd& torques, const RobotModel& model,
                      const EnvConfig& config) {
  const RewardWeights& w = config.weights;
  const double energy = (torques.array() * state.qdot.array()).abs().sum();
  const double posture = (state.q - model.default_positions()).squaredNorm();
  const double drift = state.tilt.squaredNorm();
  const double action_rate = (action - last_action).squaredNorm();
  // No clearance or sensor term: avoidance is rewarded only through
  // survival.
  return w.alive - w.energy * energy - w.posture * posture - w.drift * drift -
         w.action_rate * action_rate;
}

DodgeEnv::DodgeEnv(RobotModel model, SensorNetConfig sensors, EnvConfig config)
    : model_((model.validate(), std::move(model))),
      sensors_(model_, std::move(sensors)),
      config_(std::move(config)) {
  config_.validate();
  aim_link_ = model_.link_index(config_.aim_link);
  if (aim_link_ < 0) {
    throw ConfigError("env: aim link '" + config_.aim_link + "' not in model");
  }
}

int DodgeEnv::actor_dim() const {
  return 3 + 2 * model_.num_joints() + 3 + sensors_.dim();
}

Vec3d DodgeEnv::aim_center(const LinkFrames& frames) const {
  const Capsuled& c = frames.capsules[aim_link_];
  return 0.5 * (c.endpoint_a + c.endpoint_b);
}

void DodgeEnv::reset(std::uint64_t seed, EpisodeState& ep) const {
  ep.rng.seed(seed);
  ep.robot = rest_state(model_);
  for (int j = 0; j < model_.num_joints(); ++j) {
    const JointSpec& js = model_.joints[j];
    const double noise =
        uniform(ep.rng, -config_.joint_noise, config_.joint_noise);
    ep.robot.q[j] = std::clamp(js.q_default + noise, js.q_min, js.q_max);
  }
  ep.balls.clear();
  ep.time = 0.0;
  ep.steps = 0;
  ep.finished = false;
  ep.episode_return = 0.0;
  ep.last_action = Eigen::VectorXd::Zero(model_.num_joints());
  forward_kinematics(model_, ep.robot, ep.frames);
  ep.balls.push_back(
      spawn_ball(ep.rng, aim_center(ep.frames), ep.robot.base_pos, config_));
  ep.next_throw_time =
      uniform(ep.rng, config_.throw_interval.lo, config_.throw_interval.hi);
}

EpisodeState DodgeEnv::reset(std::uint64_t seed) const {
  EpisodeState ep;
  reset(seed, ep);
  return ep;
}

void DodgeEnv::observe(EpisodeState& ep, Eigen::Ref<Eigen::VectorXd> actor,
                       Eigen::Ref<Eigen::VectorXd> critic) const {
  const int n = model_.num_joints();
  const RobotState& r = ep.robot;
  int k = 0;
  actor.segment<3>(k) = r.base_angvel;
  k += 3;
  actor.segment(k, n) = r.q - model_.default_positions();
  k += n;
  actor.segment(k, n) = r.qdot;
  k += n;
  actor.segment<3>(k) = projected_gravity(r);
  k += 3;
  forward_kinematics(model_, r, ep.frames);
  sensors_.world_poses(ep.frames.link_poses, ep.sensor_poses);
  sensors_.sense(ep.balls, ep.sensor_poses, base_pose(r),
                 actor.segment(k, sensors_.dim()));
  critic.head(actor.size()) = actor;
  critic.tail<3>() = r.base_linvel;
}

Observation DodgeEnv::observe(EpisodeState& ep) const {
  Observation obs;
  obs.actor.resize(actor_dim());
  obs.critic.resize(critic_dim());
  observe(ep, obs.actor, obs.critic);
  return obs;
}

StepInfo DodgeEnv::step_into(EpisodeState& ep,
                             const Eigen::Ref<const Eigen::VectorXd>& action,
                             double& reward, bool& terminated,
                             bool& truncated) const {
  const int n = model_.num_joints();
  if (ep.finished) throw UsageError("step called on a finished episode");
  if (action.size() != n) throw ConfigError("env step: action dimension");
  if (!action.allFinite()) throw ConfigError("env step: non-finite action");

  Eigen::VectorXd target(n);
  for (int j = 0; j < n; ++j) {
    const JointSpec& js = model_.joints[j];
    target[j] = std::clamp(js.q_default + config_.action_scale * action[j],
                           js.q_min, js.q_max);
  }

  const double dt = config_.dt_control / config_.substeps;
  StepInfo info;
  TorqueCommand cmd;
  forward_kinematics(model_, ep.robot, ep.frames);
  for (int sub = 0; sub < config_.substeps; ++sub) {
    cmd = pd_torque(target, ep.robot, model_);
    const Eigen::Vector2d offsets =
        tipping_offsets(model_, ep.robot, ep.frames);
    DynamicsResult dyn =
        step_dynamics(ep.robot, cmd, dt, model_, offsets);
    if (dyn.fault) {
      info.fall = true;
      break;
    }
    ep.robot = std::move(dyn.state);
    for (Ball& b : ep.balls) b = step_ball(b, dt, config_.gravity);
    forward_kinematics(model_, ep.robot, ep.frames);
    for (const Capsuled& cap : ep.frames.capsules) {
      for (const Ball& b : ep.balls) {
        if (capsule_sphere_penetration(cap, b.sphere())) info.contact = true;
      }
    }
    if (info.contact) break;
  }
  ep.steps += 1;
  ep.time = ep.steps * config_.dt_control;

  const Vec3d base = ep.robot.base_pos;
  std::erase_if(ep.balls, [&](const Ball& b) {
    return b.position.z() < -b.radius ||
           (b.position - base).norm() > config_.cull_distance;
  });
  if (ep.time >= ep.next_throw_time - 1e-9) {
    if (static_cast<int>(ep.balls.size()) < config_.max_balls) {
      ep.balls.push_back(
          spawn_ball(ep.rng, aim_center(ep.frames), base, config_));
    }
    ep.next_throw_time +=
        uniform(ep.rng, config_.throw_interval.lo, config_.throw_interval.hi);
  }

  info.fall = info.fall || check_fall(ep.robot, model_);
  terminated = info.contact || info.fall;
  truncated = !terminated && ep.steps >= config_.max_steps();
  info.success = truncated;
  if (info.contact) {
    reward = 0.0;
  } else {
    reward = compute_reward(ep.robot, action, ep.last_action, cmd.tau, model_,
                            config_);
  }
  ep.last_action = action;
  ep.episode_return += reward;
  ep.finished = terminated || truncated;
  return info;
}

StepResult DodgeEnv::step(EpisodeState& ep,
                          const Eigen::VectorXd& action) const {
  StepResult r;
  r.info = step_into(ep, action, r.reward, r.terminated, r.truncated);
  r.observation = observe(ep);
  return r;
}

BatchedDodgeEnv::BatchedDodgeEnv(std::shared_ptr<const DodgeEnv> env,
                                 int num_envs, std::uint64_t seed, int workers)
    : env_(std::move(env)), workers_(workers) {
  if (num_envs < 1) throw ConfigError("batched env: need at least one env");
  episodes_.resize(num_envs);
  seed_streams_.reserve(num_envs);
  for (int i = 0; i < num_envs; ++i) {
    seed_streams_.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(i)));
  }
}

void BatchedDodgeEnv::reset(VecStep& out) {
  const int b = num_envs();
  out.resize(actor_dim(), critic_dim(), b);
  parallel_for(b, workers_, [&](std::size_t i) {
    EpisodeState& ep = episodes_[i];
    env_->reset(seed_streams_[i](), ep);
    Eigen::VectorXd actor(actor_dim()), critic(critic_dim());
    env_->observe(ep, actor, critic);
    out.actor_obs.col(i) = actor.cast<Real>();
    out.critic_obs.col(i) = critic.cast<Real>();
  });
}

void BatchedDodgeEnv::step(const MatrixR& actions, VecStep& out) {
  const int b = num_envs();
  if (actions.rows() != action_dim() || actions.cols() != b) {
    throw ConfigError("batched env: action matrix shape mismatch");
  }
  out.resize(actor_dim(), critic_dim(), b);
  parallel_for(b, workers_, [&](std::size_t i) {
    EpisodeState& ep = episodes_[i];
    const Eigen::VectorXd a = actions.col(i).cast<double>();
    double reward = 0.0;
    bool term = false;
    bool trunc = false;
    const StepInfo info = env_->step_into(ep, a, reward, term, trunc);
    Eigen::VectorXd actor(actor_dim()), critic(critic_dim());
    env_->observe(ep, actor, critic);
    out.reward[i] = static_cast<Real>(reward);
    out.terminated[i] = term;
    out.truncated[i] = trunc;
    if (term || trunc) {
      out.final_critic_obs.col(i) = critic.cast<Real>();
      out.episode_length[i] = ep.steps;
      out.episode_return[i] = ep.episode_return;
      out.contact[i] = info.contact;
      out.fall[i] = info.fall;
      out.success[i] = info.success;
      env_->reset(seed_streams_[i](), ep);
      env_->observe(ep, actor, critic);
    }
    out.actor_obs.col(i) = actor.cast<Real>();
    out.critic_obs.col(i) = critic.cast<Real>();
  });
}

ReplayFrame capture_frame(const DodgeEnv& env, EpisodeState& ep) {
  ReplayFrame f;
  f.step = ep.steps;
  f.time = ep.time;
  f.balls = ep.balls;
  forward_kinematics(env.model(), ep.robot, ep.frames);
  f.capsules = ep.frames.capsules;
  return f;
}

void write_replay_csv(std::ostream& os, const RobotModel& model,
                      const std::vector<ReplayFrame>& frames) {
  os << "step,time,entity,id,ax,ay,az,bx,by,bz,radius\n";
  char buf[512];
  for (const ReplayFrame& f : frames) {
    for (std::size_t i = 0; i < f.balls.size(); ++i) {
      const Vec3d& p = f.balls[i].position;
      std::snprintf(buf, sizeof(buf),
                    "%d,%.4f,ball,%zu,%.6f,%.6f,%.6f,,,,%.4f\n", f.step,
                    f.time, i, p.x(), p.y(), p.z(), f.balls[i].radius);
      os << buf;
    }
    for (std::size_t i = 0; i < f.capsules.size(); ++i) {
      const Capsuled& c = f.capsules[i];
      std::snprintf(buf, sizeof(buf),
                    "%d,%.4f,%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.4f\n",
                    f.step, f.time, model.links[i].name.c_str(), i,
                    c.endpoint_a.x(), c.endpoint_a.y(), c.endpoint_a.z(),
                    c.endpoint_b.x(), c.endpoint_b.y(), c.endpoint_b.z(),
                    c.radius);
      os << buf;
    }
  }
}

}  // namespace dodge
