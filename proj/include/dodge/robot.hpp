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

#include <string>
#include <vector>

#include "dodge/geom.hpp"

namespace dodge {

inline constexpr double kGravity = 9.81;

// One revolute degree of freedom. Joints form a tree through `parent`
// (index of an earlier joint, or -1 for the floating base); `origin` places
// the joint frame in its parent's frame before the joint rotation is applied.
struct JointSpec {
  std::string name;
  int parent = -1;
  Posed origin;
  Vec3d axis = Vec3d::UnitZ();
  double q_min = -1.0;
  double q_max = 1.0;
  double q_default = 0.0;
  double kp = 60.0;
  double kd = 1.5;
  double torque_limit = 80.0;
  double inertia = 0.5;
  double damping = 0.1;
};

// A rigid body carried by a joint frame (or by the base when
// parent_joint == -1).
struct LinkSpec {
  std::string name;
  int parent_joint = -1;
  Posed attach;
  Capsuled capsule;  // link frame
  double mass = 1.0;
  Vec3d com_offset = Vec3d::Zero();
  bool upper_body = true;
};

struct RobotModel {
  std::vector<JointSpec> joints;
  std::vector<LinkSpec> links;
  double base_height = 1.0;      // pivot-to-base distance (m)
  double pendulum_length = 0.9;  // l (m)
  double tilt_gain = 3.0;        // alpha, drive per metre of CoM offset
  double tilt_damping = 1.0;     // c_d (1/s)
  double fall_threshold = 0.5;   // rad

  int num_joints() const { return static_cast<int>(joints.size()); }
  int num_links() const { return static_cast<int>(links.size()); }
  int link_index(const std::string& name) const;
  int joint_index(const std::string& name) const;
  Eigen::VectorXd default_positions() const;

  // Throws ConfigError when an invariant does not hold.
  void validate() const;
};

// The 21-joint upper-body humanoid used by default.
RobotModel default_robot_model();

struct RobotState {
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;
  Vec3d base_pos = Vec3d::Zero();
  Vec3d base_linvel = Vec3d::Zero();
  Vec3d base_angvel = Vec3d::Zero();  // base frame
  Eigen::Vector2d tilt = Eigen::Vector2d::Zero();
  Eigen::Vector2d tilt_rate = Eigen::Vector2d::Zero();

  bool all_finite() const;
};

// Upright, resting state at the default joint positions.
RobotState rest_state(const RobotModel& model);

struct TorqueCommand {
  Eigen::VectorXd tau;
};

// Tilt (theta_x, theta_y) rotates the body about the ground pivot:
// positive theta_x leans the top toward +y, positive theta_y toward -x.
Rotationd base_orientation(const Eigen::Vector2d& tilt);
Posed base_pose(const RobotState& state);

TorqueCommand pd_torque(const Eigen::VectorXd& q_target,
                        const RobotState& state, const RobotModel& model);

struct DynamicsResult {
  RobotState state;
  bool fault = false;  // non-finite input; state is left unchanged
};

DynamicsResult step_dynamics(const RobotState& state, const TorqueCommand& cmd,
                             double dt, const RobotModel& model);

// Same integration with the tipping offsets already known for `state`.
DynamicsResult step_dynamics(const RobotState& state, const TorqueCommand& cmd,
                             double dt, const RobotModel& model,
                             const Eigen::Vector2d& offsets);

struct LinkFrames {
  std::vector<Posed> joint_frames;  // world
  std::vector<Posed> link_poses;    // world
  std::vector<Capsuled> capsules;   // world
};

LinkFrames forward_kinematics(const RobotModel& model, const RobotState& state);

// Allocation-free variant for hot loops; `out` is resized on first use.
void forward_kinematics(const RobotModel& model, const RobotState& state,
                        LinkFrames& out);

Vec3d compute_com(const RobotModel& model,
                  const std::vector<Posed>& link_poses);

// Horizontal CoM offsets driving (theta_x, theta_y), measured in the base
// frame along the direction each positive tilt leans toward.
Eigen::Vector2d tipping_offsets(const RobotModel& model,
                                const RobotState& state);
Eigen::Vector2d tipping_offsets(const RobotModel& model,
                                const RobotState& state,
                                const LinkFrames& frames);

Vec3d projected_gravity(const RobotState& state);

bool check_fall(const RobotState& state, const RobotModel& model);

}  // namespace dodge
