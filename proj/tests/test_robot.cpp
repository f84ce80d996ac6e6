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
#include <numbers>

#include "dodge/errors.hpp"
#include "dodge/rng.hpp"
#include "dodge/robot.hpp"

namespace dodge {
namespace {

// One joint about z at the base origin and one link hanging off it.
RobotModel single_joint_model() {
  RobotModel m;
  JointSpec j;
  j.name = "yaw";
  j.axis = Vec3d::UnitZ();
  j.q_min = -3.0;
  j.q_max = 3.0;
  m.joints.push_back(j);
  LinkSpec l;
  l.name = "arm";
  l.parent_joint = 0;
  l.attach = Posed::Translation(Vec3d(1, 0, 0));
  l.capsule = {Vec3d::Zero(), Vec3d(0.5, 0, 0), 0.1};
  l.mass = 2.0;
  m.links.push_back(l);
  return m;
}

TEST(DefaultModel, Shape) {
  const RobotModel m = default_robot_model();
  EXPECT_EQ(m.num_joints(), 21);
  EXPECT_EQ(m.num_links(), 12);
  EXPECT_NO_THROW(m.validate());
  for (int j = 0; j < m.num_joints(); ++j) {
    EXPECT_LT(m.joints[j].parent, j) << "joints must be topologically ordered";
  }
  EXPECT_DOUBLE_EQ(m.joints[0].kp, 60.0);
  EXPECT_DOUBLE_EQ(m.joints[0].kd, 1.5);
  EXPECT_DOUBLE_EQ(m.joints[0].torque_limit, 80.0);
  EXPECT_DOUBLE_EQ(m.joints[0].inertia, 0.5);
  EXPECT_DOUBLE_EQ(m.joints[0].damping, 0.1);
  EXPECT_DOUBLE_EQ(m.pendulum_length, 0.9);
  EXPECT_DOUBLE_EQ(m.tilt_gain, 3.0);
  EXPECT_DOUBLE_EQ(m.tilt_damping, 1.0);
  EXPECT_DOUBLE_EQ(m.fall_threshold, 0.5);
}

TEST(DefaultModel, RestPoseIsBalanced) {
  const RobotModel m = default_robot_model();
  const RobotState s = rest_state(m);
  const Eigen::Vector2d d = tipping_offsets(m, s);
  EXPECT_NEAR(d.norm(), 0.0, 1e-12);
}

TEST(Validate, RejectsBadSpecs) {
  RobotModel m = single_joint_model();
  m.joints[0].q_min = 1.0;
  m.joints[0].q_max = 1.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = single_joint_model();
  m.links[0].mass = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = single_joint_model();
  m.joints[0].parent = 0;  // self loop
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(PdTorque, Examples) {
  RobotModel m = single_joint_model();
  m.joints[0].kp = 50;
  m.joints[0].kd = 2;
  m.joints[0].torque_limit = 100;
  RobotState s = rest_state(m);
  EXPECT_DOUBLE_EQ(pd_torque(Eigen::VectorXd::Constant(1, 1.0), s, m).tau[0], 50.0);
  m.joints[0].q_min = -20;
  m.joints[0].q_max = 20;
  EXPECT_DOUBLE_EQ(pd_torque(Eigen::VectorXd::Constant(1, 10.0), s, m).tau[0], 100.0);
  EXPECT_DOUBLE_EQ(pd_torque(Eigen::VectorXd::Constant(1, -10.0), s, m).tau[0], -100.0);
  s.q[0] = 0.3;
  EXPECT_DOUBLE_EQ(pd_torque(Eigen::VectorXd::Constant(1, 0.3), s, m).tau[0], 0.0);
  EXPECT_THROW(pd_torque(Eigen::VectorXd::Zero(2), s, m), ConfigError);
}

TEST(StepDynamics, SemiImplicitEuler) {
  RobotModel m = single_joint_model();
  m.joints[0].inertia = 1.0;
  m.joints[0].damping = 0.0;
  const RobotState s = rest_state(m);
  const auto r = step_dynamics(s, {Eigen::VectorXd::Constant(1, 1.0)}, 0.01, m);
  ASSERT_FALSE(r.fault);
  EXPECT_NEAR(r.state.qdot[0], 0.01, 1e-15);
  EXPECT_NEAR(r.state.q[0], 0.0001, 1e-15);
}

TEST(StepDynamics, UprightEquilibrium) {
  const RobotModel m = default_robot_model();
  RobotState s = rest_state(m);
  const TorqueCommand zero{Eigen::VectorXd::Zero(m.num_joints())};
  for (int i = 0; i < 200; ++i) s = step_dynamics(s, zero, 0.005, m).state;
  EXPECT_LT(s.tilt.norm(), 1e-12);
  EXPECT_LT(s.tilt_rate.norm(), 1e-12);
}

TEST(StepDynamics, SingleTiltStep) {
  RobotModel m = single_joint_model();
  m.pendulum_length = 1.0;
  m.tilt_damping = 0.0;
  RobotState s = rest_state(m);
  s.tilt[0] = 0.1;
  const auto r = step_dynamics(s, {Eigen::VectorXd::Zero(1)}, 0.01, m,
                               Eigen::Vector2d::Zero());
  const double expected_rate = 9.81 * std::sin(0.1) * 0.01;
  EXPECT_NEAR(r.state.tilt_rate[0], expected_rate, 1e-12);
  EXPECT_NEAR(r.state.tilt_rate[0], 0.0098, 1e-4);
  EXPECT_NEAR(r.state.tilt[0], 0.1 + 0.01 * expected_rate, 1e-12);
  EXPECT_EQ(r.state.tilt[1], 0.0);
}

TEST(StepDynamics, RejectsBadTimestep) {
  const RobotModel m = single_joint_model();
  const RobotState s = rest_state(m);
  const TorqueCommand zero{Eigen::VectorXd::Zero(1)};
  EXPECT_THROW(step_dynamics(s, zero, 0.0, m), ConfigError);
  EXPECT_THROW(step_dynamics(s, zero, 0.03, m), ConfigError);
  EXPECT_NO_THROW(step_dynamics(s, zero, 0.02, m));
}

TEST(StepDynamics, NonFiniteTorqueFaults) {
  const RobotModel m = single_joint_model();
  RobotState s = rest_state(m);
  s.q[0] = 0.2;
  const auto r = step_dynamics(
      s, {Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN())},
      0.01, m);
  EXPECT_TRUE(r.fault);
  EXPECT_EQ(r.state.q[0], 0.2);
}

TEST(StepDynamics, LimitClampZeroesVelocity) {
  RobotModel m = single_joint_model();
  m.joints[0].q_max = 0.01;
  RobotState s = rest_state(m);
  s.qdot[0] = 5.0;
  const auto r = step_dynamics(s, {Eigen::VectorXd::Zero(1)}, 0.01, m);
  EXPECT_EQ(r.state.q[0], 0.01);
  EXPECT_EQ(r.state.qdot[0], 0.0);
}

TEST(StepDynamics, JointLimitsHoldUnderRandomTorques) {
  const RobotModel m = default_robot_model();
  RobotState s = rest_state(m);
  Rng rng(derive_seed(21, 0));
  for (int step = 0; step < 2000; ++step) {
    TorqueCommand cmd{Eigen::VectorXd(m.num_joints())};
    for (int j = 0; j < m.num_joints(); ++j) cmd.tau[j] = uniform(rng, -80, 80);
    s = step_dynamics(s, cmd, 0.005, m).state;
    s.tilt.setZero();  // keep the base upright; only joints are under test
    s.tilt_rate.setZero();
    for (int j = 0; j < m.num_joints(); ++j) {
      ASSERT_GE(s.q[j], m.joints[j].q_min);
      ASSERT_LE(s.q[j], m.joints[j].q_max);
    }
  }
}

TEST(StepDynamics, KineticEnergyNonIncreasingWithoutTorque) {
  const RobotModel m = default_robot_model();
  RobotState s = rest_state(m);
  Rng rng(derive_seed(21, 1));
  for (int j = 0; j < m.num_joints(); ++j) s.qdot[j] = uniform(rng, -3, 3);
  const TorqueCommand zero{Eigen::VectorXd::Zero(m.num_joints())};
  double prev = s.qdot.squaredNorm();
  for (int step = 0; step < 500; ++step) {
    s = step_dynamics(s, zero, 0.005, m).state;
    const double e = s.qdot.squaredNorm();
    ASSERT_LE(e, prev);
    prev = e;
  }
}

TEST(StepDynamics, TippingMonotoneUnderPositiveOffset) {
  RobotModel m = default_robot_model();
  m.tilt_damping = 0.0;
  RobotState s = rest_state(m);
  const TorqueCommand zero{Eigen::VectorXd::Zero(m.num_joints())};
  const Eigen::Vector2d offsets(0.02, 0.05);
  Eigen::Vector2d prev = s.tilt;
  for (int step = 0; step < 300; ++step) {
    s = step_dynamics(s, zero, 0.005, m, offsets).state;
    ASSERT_GE(s.tilt[0], prev[0]);
    ASSERT_GE(s.tilt[1], prev[1]);
    prev = s.tilt;
  }
  EXPECT_GT(s.tilt[0], 0.0);
}

TEST(StepDynamics, Deterministic) {
  const RobotModel m = default_robot_model();
  RobotState s = rest_state(m);
  s.tilt = Eigen::Vector2d(0.01, -0.02);
  TorqueCommand cmd{Eigen::VectorXd::LinSpaced(m.num_joints(), -5, 5)};
  const auto a = step_dynamics(s, cmd, 0.005, m);
  const auto b = step_dynamics(s, cmd, 0.005, m);
  EXPECT_EQ(a.state.q, b.state.q);
  EXPECT_EQ(a.state.qdot, b.state.qdot);
  EXPECT_EQ(a.state.tilt, b.state.tilt);
  EXPECT_EQ(a.state.base_angvel, b.state.base_angvel);
}

TEST(Kinematics, RestPoseMatchesModelOffsets) {
  const RobotModel m = default_robot_model();
  const LinkFrames f = forward_kinematics(m, rest_state(m));
  // With every joint at zero the chain reduces to summed translations.
  const int chest = m.link_index("chest");
  const Vec3d base(0, 0, m.base_height);
  EXPECT_LT((f.link_poses[chest].position - (base + Vec3d(0, 0, 0.1))).norm(), 1e-12);
  for (const Posed& p : f.link_poses) {
    EXPECT_LT(p.orientation.angularDistance(Rotationd::Identity()), 1e-12);
  }
}

TEST(Kinematics, SingleJointQuarterTurn) {
  const RobotModel m = single_joint_model();
  RobotState s = rest_state(m);
  s.q[0] = std::numbers::pi / 2;
  const LinkFrames f = forward_kinematics(m, s);
  const Vec3d expected = Vec3d(0, 0, m.base_height) + Vec3d(0, 1, 0);
  EXPECT_LT((f.link_poses[0].position - expected).norm(), 1e-9);
  EXPECT_LT((f.capsules[0].endpoint_b - (expected + Vec3d(0, 0.5, 0))).norm(), 1e-9);
}

TEST(Kinematics, ChainMatchesSequentialTransforms) {
  RobotModel m;
  JointSpec j0;
  j0.name = "a";
  j0.origin = Posed::Translation(Vec3d(0, 0, 0.3));
  j0.axis = Vec3d::UnitZ();
  j0.q_min = -3;
  j0.q_max = 3;
  JointSpec j1 = j0;
  j1.name = "b";
  j1.parent = 0;
  j1.origin = Posed::Translation(Vec3d(0.4, 0, 0));
  j1.axis = Vec3d(0, 1, 1).normalized();
  m.joints = {j0, j1};
  LinkSpec l;
  l.name = "tip";
  l.parent_joint = 1;
  l.attach = Posed::Translation(Vec3d(0.2, 0.1, 0));
  m.links = {l};
  RobotState s = rest_state(m);
  s.q << 0.7, -1.1;
  s.tilt << 0.05, -0.02;
  const LinkFrames f = forward_kinematics(m, s);

  const Vec3d p_local(0.01, 0.02, 0.03);
  Vec3d p = transform_point(l.attach, p_local);
  p = transform_point(Posed::AxisAngle(j1.axis, s.q[1]), p);
  p = transform_point(j1.origin, p);
  p = transform_point(Posed::AxisAngle(j0.axis, s.q[0]), p);
  p = transform_point(j0.origin, p);
  p = transform_point(base_pose(s), p);
  EXPECT_LT((transform_point(f.link_poses[0], p_local) - p).norm(), 1e-12);
}

TEST(CenterOfMass, Examples) {
  RobotModel m = single_joint_model();
  std::vector<Posed> poses = {Posed::Translation(Vec3d(0.3, 0.2, 0.1))};
  m.links[0].com_offset = Vec3d(0.1, 0, 0);
  EXPECT_LT((compute_com(m, poses) - Vec3d(0.4, 0.2, 0.1)).norm(), 1e-15);

  m.links.push_back(m.links[0]);
  m.links[0].com_offset.setZero();
  m.links[1].com_offset.setZero();
  m.links[0].mass = 1.0;
  m.links[1].mass = 1.0;
  poses = {Posed::Translation(Vec3d(0, 0, 1)), Posed::Translation(Vec3d(0, 0, 3))};
  EXPECT_LT((compute_com(m, poses) - Vec3d(0, 0, 2)).norm(), 1e-15);

  m.links[1].mass = 3.0;
  poses = {Posed::Translation(Vec3d(0, 0, 0)), Posed::Translation(Vec3d(4, 0, 0))};
  EXPECT_LT((compute_com(m, poses) - Vec3d(3, 0, 0)).norm(), 1e-15);
}

TEST(ProjectedGravity, Examples) {
  const RobotModel m = default_robot_model();
  RobotState s = rest_state(m);
  EXPECT_LT((projected_gravity(s) - Vec3d(0, 0, -1)).norm(), 1e-15);
  s.tilt << 0.0, std::numbers::pi / 2;
  EXPECT_LT((projected_gravity(s) - Vec3d(-1, 0, 0)).norm(), 1e-9);
  s.tilt << 0.1, 0.0;
  EXPECT_NEAR(projected_gravity(s).z(), -std::cos(0.1), 1e-15);
  EXPECT_NEAR(projected_gravity(s).norm(), 1.0, 1e-15);
}

TEST(CheckFall, Examples) {
  const RobotModel m = default_robot_model();
  RobotState s = rest_state(m);
  EXPECT_FALSE(check_fall(s, m));
  s.tilt << 0.6, 0.0;
  EXPECT_TRUE(check_fall(s, m));
  s.tilt << 0.3, 0.4;  // magnitude exactly at the threshold
  EXPECT_FALSE(check_fall(s, m));
  s.tilt << 0.3, 0.41;
  EXPECT_TRUE(check_fall(s, m));
}

TEST(Kinematics, BaseMotionFollowsTilt) {
  const RobotModel m = default_robot_model();
  RobotState s = rest_state(m);
  s.tilt_rate << 0.5, 0.0;
  const TorqueCommand zero{Eigen::VectorXd::Zero(m.num_joints())};
  s = step_dynamics(s, zero, 0.005, m).state;
  // Positive roll tips the top of the robot towards +y.
  EXPECT_GT(s.base_pos.y(), 0.0);
  EXPECT_GT(s.base_linvel.y(), 0.0);
  EXPECT_LT(s.base_angvel.x(), 0.0);
  EXPECT_NEAR(s.base_pos.norm(), m.base_height, 1e-12);
}

}  // namespace
}  // namespace dodge
