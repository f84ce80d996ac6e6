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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dodge/ball.hpp"
#include "dodge/geom.hpp"
#include "dodge/robot.hpp"

namespace dodge {

enum class SensorGeometry { kRayGrid, kField };
enum class SignalFn { kLocalization, kProximity, kBinary };
enum class BeamReduction { kFull, kMinBeam, kAnyBeam };

std::string_view to_string(SensorGeometry g);
std::string_view to_string(SignalFn f);
std::string_view to_string(BeamReduction r);
SensorGeometry parse_geometry(std::string_view s);
SignalFn parse_signal(std::string_view s);
BeamReduction parse_reduction(std::string_view s);

struct SensorNetConfig {
  SensorGeometry geometry = SensorGeometry::kField;
  SignalFn signal = SignalFn::kProximity;
  BeamReduction reduction = BeamReduction::kFull;
  double range = 1.0;  // r_max (m)
  int count = 64;
  int grid = 8;  // beams per side
  double diagonal_fov_deg = 63.0;
  std::uint64_t placement_seed = 7;

  // Throws ConfigError. min_beam pairs with proximity and any_beam with
  // binary; fields and localization use the full (unreduced) signal.
  void validate() const;
  bool operator==(const SensorNetConfig&) const = default;
};

// Sensor frame on a link surface: z axis is the outward surface normal.
struct SensorPose {
  int link = -1;
  Posed local;
};

int observation_dim(const SensorNetConfig& config);

std::vector<SensorPose> place_sensors(const RobotModel& model,
                                      const SensorNetConfig& config);

// Unit beam directions in the sensor frame, index = i * grid + j where i
// steps along the sensor x axis and j along y.
std::vector<Vec3d> ray_directions(const SensorNetConfig& config);

// Half-width of the beam grid on the z = 1 tangent plane.
double beam_grid_half_extent(const SensorNetConfig& config);

// Signals for a scene. Poses are world-frame sensor poses; localization is
// reported in `base` coordinates. `out` must have observation_dim entries.
void sense(std::span<const Ball> balls, std::span<const Posed> sensor_poses,
           const SensorNetConfig& config, std::span<const Vec3d> beams,
           const Posed& base, Eigen::Ref<Eigen::VectorXd> out);

Eigen::VectorXd sense(std::span<const Ball> balls,
                      std::span<const Posed> sensor_poses,
                      const SensorNetConfig& config, const Posed& base);

// Placement plus cached beam directions for one robot.
class SensorNet {
 public:
  SensorNet(const RobotModel& model, SensorNetConfig config);

  const SensorNetConfig& config() const { return config_; }
  const std::vector<SensorPose>& placements() const { return placements_; }
  int dim() const { return observation_dim(config_); }

  void world_poses(const std::vector<Posed>& link_poses,
                   std::vector<Posed>& out) const;

  void sense(std::span<const Ball> balls, std::span<const Posed> sensor_poses,
             const Posed& base, Eigen::Ref<Eigen::VectorXd> out) const;

 private:
  SensorNetConfig config_;
  std::vector<SensorPose> placements_;
  std::vector<Vec3d> beams_;
};

// CSV with header sensor_id,link,x,y,z,nx,ny,nz; positions and normals are
// world coordinates at the model's rest pose.
void write_placements_csv(std::ostream& os, const RobotModel& model,
                          const std::vector<SensorPose>& placements);

}  // namespace dodge
