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

#include "dodge/robot.hpp"

#include <cmath>

#include "dodge/errors.hpp"

namespace dodge {

int RobotModel::link_index(const std::string& name) const {
  for (int i = 0; i < num_links(); ++i) {
    if (links[i].name == name) return i;
  }
  return -1;
}

int RobotModel::joint_index(const std::string& name) const {
  for (int i = 0; i < num_joints(); ++i) {
    if (joints[i].name == name) return i;
  }
  return -1;
}

Eigen::VectorXd RobotModel::default_positions() const {
  Eigen::VectorXd q(num_joints());
  for (int j = 0; j < num_joints(); ++j) q[j] = joints[j].q_default;
  return q;
}

void RobotModel::validate() const {
  if (joints.empty()) throw ConfigError("robot model has no joints");
  if (links.empty()) throw ConfigError("robot model has no links");
  for (int j = 0; j < num_joints(); ++j) {
    const JointSpec& js = joints[j];
    if (js.parent < -1 || js.parent >= j) {
      throw ConfigError("joint '" + js.name +
                        "' must have parent -1 or an earlier joint");
    }
    if (!(js.q_min < js.q_max)) {
      throw ConfigError("joint '" + js.name + "' requires q_min < q_max");
    }
    if (js.q_default < js.q_min || js.q_default > js.q_max) {
      throw ConfigError("joint '" + js.name + "' default outside limits");
    }
    if (!(js.kp > 0 && js.kd > 0 && js.inertia > 0 && js.torque_limit > 0 &&
          js.damping >= 0)) {
      throw ConfigError("joint '" + js.name + "' has non-positive gains");
    }
    if (std::abs(js.axis.norm() - 1.0) > 1e-9) {
      throw ConfigError("joint '" + js.name + "' axis is not unit norm");
    }
  }
  for (const LinkSpec& ls : links) {
    if (ls.parent_joint < -1 || ls.parent_joint >= num_joints()) {
      throw ConfigError("link '" + ls.name + "' has invalid parent joint");
    }
    if (!(ls.mass > 0)) throw ConfigError("link '" + ls.name + "' mass <= 0");
    if (!(ls.capsule.radius > 0)) {
      throw ConfigError("link '" + ls.name + "' capsule radius <= 0");
    }
  }
  if (!(base_height > 0 && pendulum_length > 0 && fall_threshold > 0 &&
        tilt_damping >= 0)) {
    throw ConfigError("robot pendulum constants must be positive");
  }
}

namespace {

JointSpec make_joint(std::string name, int parent, Vec3d origin, Vec3d axis,
                     double q_min, double q_max) {
  JointSpec j;
  j.name = std::move(name);
  j.parent = parent;
  j.origin = Posed::Translation(origin);
  j.axis = axis;
  j.q_min = q_min;
  j.q_max = q_max;
  return j;
}

LinkSpec make_link(std::string name, int parent_joint, Vec3d a, Vec3d b,
                   double radius, double mass, bool upper_body = true) {
  LinkSpec l;
  l.name = std::move(name);
  l.parent_joint = parent_joint;
  l.capsule = Capsuled{a, b, radius};
  l.mass = mass;
  l.com_offset = 0.5 * (a + b);
  l.upper_body = upper_body;
  return l;
}

}  // namespace

RobotModel default_robot_model() {
  RobotModel m;
  const Vec3d x = Vec3d::UnitX();
  const Vec3d y = Vec3d::UnitY();
  const Vec3d z = Vec3d::UnitZ();
  auto& J = m.joints;
  J.push_back(make_joint("waist_yaw", -1, {0, 0, 0.1}, z, -1.0, 1.0));
  J.push_back(make_joint("waist_pitch", 0, {0, 0, 0}, y, -0.6, 0.6));
  J.push_back(make_joint("waist_roll", 1, {0, 0, 0}, x, -0.4, 0.4));
  J.push_back(make_joint("head_yaw", 2, {0, 0, 0.55}, z, -0.8, 0.8));
  J.push_back(make_joint("head_pitch", 3, {0, 0, 0}, y, -0.5, 0.5));
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const std::string p = side == 0 ? "left_" : "right_";
    const int base = m.num_joints();
    J.push_back(make_joint(p + "shoulder_pitch", 2, {0, s * 0.22, 0.40}, y,
                           -2.5, 2.0));
    // Positive roll swings the left arm outward; mirrored on the right.
    J.push_back(make_joint(p + "shoulder_roll", base, {0, 0, 0}, x,
                           side == 0 ? -0.3 : -2.0, side == 0 ? 2.0 : 0.3));
    J.push_back(make_joint(p + "shoulder_yaw", base + 1, {0, 0, 0}, z, -1.5,
                           1.5));
    J.push_back(make_joint(p + "elbow", base + 2, {0, 0, -0.28}, -y, -0.2,
                           2.2));
    J.push_back(make_joint(p + "wrist_roll", base + 3, {0, 0, -0.24}, z, -1.0,
                           1.0));
    J.push_back(make_joint(p + "wrist_pitch", base + 4, {0, 0, 0}, y, -1.0,
                           1.0));
    J.push_back(make_joint(p + "wrist_yaw", base + 5, {0, 0, 0}, x, -1.0,
                           1.0));
    J.push_back(make_joint(p + "grip", base + 6, {0, 0, -0.04}, y, 0.0, 1.0));
  }

  auto& L = m.links;
  L.push_back(make_link("pelvis", -1, {0, -0.1, 0}, {0, 0.1, 0}, 0.12, 8.0,
                        false));
  L.push_back(make_link("abdomen", 2, {0, 0, 0.05}, {0, 0, 0.2}, 0.13, 6.0));
  L.push_back(
      make_link("chest", 2, {0, -0.1, 0.35}, {0, 0.1, 0.35}, 0.15, 12.0));
  L.push_back(make_link("head", 4, {0, 0, 0.05}, {0, 0, 0.15}, 0.1, 3.0));
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const std::string p = side == 0 ? "left_" : "right_";
    const int base = m.joint_index(p + "shoulder_pitch");
    L.push_back(make_link(p + "shoulder", base + 2, {0, 0, 0},
                          {0, s * 0.04, 0}, 0.07, 1.0));
    L.push_back(make_link(p + "upper_arm", base + 2, {0, 0, -0.04},
                          {0, 0, -0.26}, 0.05, 2.0));
    L.push_back(make_link(p + "forearm", base + 3, {0, 0, -0.03},
                          {0, 0, -0.22}, 0.045, 1.5));
    L.push_back(
        make_link(p + "hand", base + 7, {0, 0, -0.02}, {0, 0, -0.1}, 0.04,
                  0.5));
  }
  return m;
}

bool RobotState::all_finite() const {
  return q.allFinite() && qdot.allFinite() && base_pos.allFinite() &&
         base_linvel.allFinite() && base_angvel.allFinite() &&
         tilt.allFinite() && tilt_rate.allFinite();
}

Rotationd base_orientation(const Eigen::Vector2d& tilt) {
  return Rotationd(Eigen::AngleAxisd(-tilt[1], Vec3d::UnitY())) *
         Rotationd(Eigen::AngleAxisd(-tilt[0], Vec3d::UnitX()));
}

Posed base_pose(const RobotState& state) {
  return Posed{state.base_pos, base_orientation(state.tilt)};
}

namespace {

// Keeps the kinematic base quantities consistent with the tilt state.
void update_base(RobotState& s, const RobotModel& model) {
  const Rotationd r = base_orientation(s.tilt);
  s.base_pos = r * Vec3d(0, 0, model.base_height);
  const Vec3d omega_world =
      Vec3d(0, -s.tilt_rate[1], 0) +
      Eigen::AngleAxisd(-s.tilt[1], Vec3d::UnitY()) *
          Vec3d(-s.tilt_rate[0], 0, 0);
  s.base_angvel = r.conjugate() * omega_world;
  s.base_linvel = omega_world.cross(s.base_pos);
}

}  // namespace

RobotState rest_state(const RobotModel& model) {
  RobotState s;
  s.q = model.default_positions();
  s.qdot = Eigen::VectorXd::Zero(model.num_joints());
  update_base(s, model);
  return s;
}

TorqueCommand pd_torque(const Eigen::VectorXd& q_target,
                        const RobotState& state, const RobotModel& model) {
  const int n = model.num_joints();
  if (q_target.size() != n || state.q.size() != n || state.qdot.size() != n) {
    throw ConfigError("pd_torque: dimension mismatch");
  }
  TorqueCommand cmd;
  cmd.tau.resize(n);
  for (int j = 0; j < n; ++j) {
    const JointSpec& js = model.joints[j];
    // Target velocity is taken as zero.
    const double tau =
        js.kp * (q_target[j] - state.q[j]) + js.kd * (0.0 - state.qdot[j]);
    cmd.tau[j] = std::clamp(tau, -js.torque_limit, js.torque_limit);
  }
  return cmd;
}

DynamicsResult step_dynamics(const RobotState& state, const TorqueCommand& cmd,
                             double dt, const RobotModel& model) {
  return step_dynamics(state, cmd, dt, model, tipping_offsets(model, state));
}

DynamicsResult step_dynamics(const RobotState& state, const TorqueCommand& cmd,
                             double dt, const RobotModel& model,
                             const Eigen::Vector2d& offsets) {
  const int n = model.num_joints();
  if (!(dt > 0.0 && dt <= 0.02)) {
    throw ConfigError("step_dynamics: dt must lie in (0, 0.02]");
  }
  if (cmd.tau.size() != n || state.q.size() != n) {
    throw ConfigError("step_dynamics: dimension mismatch");
  }
  if (!cmd.tau.allFinite()) return {state, true};

  DynamicsResult out{state, false};
  RobotState& s = out.state;
  for (int j = 0; j < n; ++j) {
    const JointSpec& js = model.joints[j];
    const double qdd = (cmd.tau[j] - js.damping * s.qdot[j]) / js.inertia;
    s.qdot[j] += qdd * dt;
    s.q[j] += s.qdot[j] * dt;
    if (s.q[j] < js.q_min) {
      s.q[j] = js.q_min;
      s.qdot[j] = 0.0;
    } else if (s.q[j] > js.q_max) {
      s.q[j] = js.q_max;
      s.qdot[j] = 0.0;
    }
  }
  const double g_over_l = kGravity / model.pendulum_length;
  for (int a = 0; a < 2; ++a) {
    const double acc = g_over_l * std::sin(s.tilt[a]) +
                       model.tilt_gain * offsets[a] -
                       model.tilt_damping * s.tilt_rate[a];
    s.tilt_rate[a] += acc * dt;
    s.tilt[a] += s.tilt_rate[a] * dt;
  }
  update_base(s, model);
  if (!s.all_finite()) return {state, true};
  return out;
}

void forward_kinematics(const RobotModel& model, const RobotState& state,
                        LinkFrames& out) {
  const int n = model.num_joints();
  out.joint_frames.resize(n);
  out.link_poses.resize(model.links.size());
  out.capsules.resize(model.links.size());
  const Posed base = base_pose(state);
  for (int j = 0; j < n; ++j) {
    const JointSpec& js = model.joints[j];
    const Posed& parent = js.parent < 0 ? base : out.joint_frames[js.parent];
    out.joint_frames[j] =
        parent * js.origin * Posed::AxisAngle(js.axis, state.q[j]);
  }
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const LinkSpec& ls = model.links[i];
    const Posed& parent =
        ls.parent_joint < 0 ? base : out.joint_frames[ls.parent_joint];
    out.link_poses[i] = parent * ls.attach;
    out.capsules[i] = transform_capsule(out.link_poses[i], ls.capsule);
  }
}

LinkFrames forward_kinematics(const RobotModel& model,
                              const RobotState& state) {
  LinkFrames out;
  forward_kinematics(model, state, out);
  return out;
}

Vec3d compute_com(const RobotModel& model,
                  const std::vector<Posed>& link_poses) {
  Vec3d weighted = Vec3d::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const LinkSpec& ls = model.links[i];
    weighted += ls.mass * transform_point(link_poses[i], ls.com_offset);
    total += ls.mass;
  }
  return weighted / total;
}

Eigen::Vector2d tipping_offsets(const RobotModel& model,
                                const RobotState& state) {
  return tipping_offsets(model, state, forward_kinematics(model, state));
}

Eigen::Vector2d tipping_offsets(const RobotModel& model,
                                const RobotState& state,
                                const LinkFrames& frames) {
  const Vec3d com = compute_com(model, frames.link_poses);
  const Vec3d local = inverse_transform_point(base_pose(state), com);
  return {local.y(), -local.x()};
}

Vec3d projected_gravity(const RobotState& state) {
  return base_orientation(state.tilt).conjugate() * Vec3d(0, 0, -1);
}

bool check_fall(const RobotState& state, const RobotModel& model) {
  return std::hypot(state.tilt[0], state.tilt[1]) > model.fall_threshold;
}

}  // namespace dodge
