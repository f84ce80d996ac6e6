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
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <optional>

namespace dodge {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Rotation = Eigen::Quaternion<Scalar>;

using Vec3d = Vec3<double>;
using Rotationd = Rotation<double>;

// Rigid transform mapping child-frame coordinates into the parent frame.
template <typename Scalar>
struct Pose {
  Vec3<Scalar> position = Vec3<Scalar>::Zero();
  Rotation<Scalar> orientation = Rotation<Scalar>::Identity();

  static Pose Identity() { return Pose{}; }

  static Pose Translation(const Vec3<Scalar>& t) {
    return Pose{t, Rotation<Scalar>::Identity()};
  }

  static Pose AxisAngle(const Vec3<Scalar>& axis, Scalar angle) {
    return Pose{Vec3<Scalar>::Zero(),
                Rotation<Scalar>(Eigen::AngleAxis<Scalar>(angle, axis))};
  }

  Pose operator*(const Pose& rhs) const {
    return Pose{position + orientation * rhs.position,
                orientation * rhs.orientation};
  }

  Pose inverse() const {
    const Rotation<Scalar> inv = orientation.conjugate();
    return Pose{-(inv * position), inv};
  }
};

using Posed = Pose<double>;

template <typename Scalar>
Vec3<Scalar> transform_point(const Pose<Scalar>& pose, const Vec3<Scalar>& p) {
  return pose.position + pose.orientation * p;
}

template <typename Scalar>
Vec3<Scalar> inverse_transform_point(const Pose<Scalar>& pose,
                                     const Vec3<Scalar>& p) {
  return pose.orientation.conjugate() * (p - pose.position);
}

template <typename Scalar>
struct SphereShape {
  Vec3<Scalar> center = Vec3<Scalar>::Zero();
  Scalar radius = Scalar(1);
};

template <typename Scalar>
struct CapsuleShape {
  Vec3<Scalar> endpoint_a = Vec3<Scalar>::Zero();
  Vec3<Scalar> endpoint_b = Vec3<Scalar>::Zero();
  Scalar radius = Scalar(1);

  Scalar segment_length() const { return (endpoint_b - endpoint_a).norm(); }
};

template <typename Scalar>
struct RayShape {
  Vec3<Scalar> origin = Vec3<Scalar>::Zero();
  Vec3<Scalar> direction = Vec3<Scalar>::UnitZ();  // unit norm
};

using Sphered = SphereShape<double>;
using Capsuled = CapsuleShape<double>;
using Rayd = RayShape<double>;

template <typename Scalar>
CapsuleShape<Scalar> transform_capsule(const Pose<Scalar>& pose,
                                       const CapsuleShape<Scalar>& cap) {
  return {transform_point(pose, cap.endpoint_a),
          transform_point(pose, cap.endpoint_b), cap.radius};
}

// Grazing discriminants below this are treated as tangent hits.
inline constexpr double kGrazingEpsilon = 1e-12;

// Smallest t >= 0 where the ray meets the sphere surface. Origins inside the
// sphere report 0.
template <typename Scalar>
std::optional<Scalar> ray_sphere_hit(const RayShape<Scalar>& ray,
                                     const SphereShape<Scalar>& sphere) {
  const Vec3<Scalar> oc = ray.origin - sphere.center;
  const Scalar c = oc.squaredNorm() - sphere.radius * sphere.radius;
  if (c <= Scalar(0)) return Scalar(0);
  const Scalar b = oc.dot(ray.direction);
  // Outside and heading away: no forward intersection.
  if (b > Scalar(0)) return std::nullopt;
  Scalar disc = b * b - c;
  if (disc < Scalar(0)) {
    if (disc < -Scalar(kGrazingEpsilon)) return std::nullopt;
    disc = Scalar(0);
  }
  const Scalar t = -b - std::sqrt(disc);
  return std::max(t, Scalar(0));
}

template <typename Scalar>
Scalar point_sphere_distance(const Vec3<Scalar>& p,
                             const SphereShape<Scalar>& sphere) {
  return (p - sphere.center).norm() - sphere.radius;
}

template <typename Scalar>
Vec3<Scalar> closest_point_on_segment(const Vec3<Scalar>& a,
                                      const Vec3<Scalar>& b,
                                      const Vec3<Scalar>& p) {
  const Vec3<Scalar> ab = b - a;
  const Scalar len2 = ab.squaredNorm();
  if (len2 <= Scalar(0)) return a;
  const Scalar t = std::clamp((p - a).dot(ab) / len2, Scalar(0), Scalar(1));
  return a + t * ab;
}

template <typename Scalar>
Scalar point_segment_distance(const Vec3<Scalar>& a, const Vec3<Scalar>& b,
                              const Vec3<Scalar>& p) {
  return (p - closest_point_on_segment(a, b, p)).norm();
}

// Overlap depth between a capsule and a sphere; empty when they are apart or
// exactly touching.
template <typename Scalar>
std::optional<Scalar> capsule_sphere_penetration(
    const CapsuleShape<Scalar>& cap, const SphereShape<Scalar>& sphere) {
  // Canonical endpoint order makes the result bitwise independent of which
  // end is called a.
  const bool swap = std::lexicographical_compare(
      cap.endpoint_b.data(), cap.endpoint_b.data() + 3, cap.endpoint_a.data(),
      cap.endpoint_a.data() + 3);
  const Vec3<Scalar>& a = swap ? cap.endpoint_b : cap.endpoint_a;
  const Vec3<Scalar>& b = swap ? cap.endpoint_a : cap.endpoint_b;
  const Scalar d = point_segment_distance(a, b, sphere.center);
  const Scalar depth = cap.radius + sphere.radius - d;
  if (depth > Scalar(0)) return depth;
  return std::nullopt;
}

}  // namespace dodge
