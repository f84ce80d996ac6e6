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

#include "dodge/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "dodge/errors.hpp"
#include "dodge/rng.hpp"

namespace dodge {

std::string_view to_string(SensorGeometry g) {
  return g == SensorGeometry::kRayGrid ? "ray" : "field";
}

std::string_view to_string(SignalFn f) {
  switch (f) {
    case SignalFn::kLocalization:
      return "localization";
    case SignalFn::kProximity:
      return "proximity";
    case SignalFn::kBinary:
      return "binary";
  }
  return "?";
}

std::string_view to_string(BeamReduction r) {
  switch (r) {
    case BeamReduction::kFull:
      return "full";
    case BeamReduction::kMinBeam:
      return "min_beam";
    case BeamReduction::kAnyBeam:
      return "any_beam";
  }
  return "?";
}

SensorGeometry parse_geometry(std::string_view s) {
  if (s == "ray" || s == "ray_grid") return SensorGeometry::kRayGrid;
  if (s == "field") return SensorGeometry::kField;
  throw ConfigError("unknown sensor geometry '" + std::string(s) + "'");
}

SignalFn parse_signal(std::string_view s) {
  if (s == "localization") return SignalFn::kLocalization;
  if (s == "proximity") return SignalFn::kProximity;
  if (s == "binary") return SignalFn::kBinary;
  throw ConfigError("unknown signal function '" + std::string(s) + "'");
}

BeamReduction parse_reduction(std::string_view s) {
  if (s == "full") return BeamReduction::kFull;
  if (s == "min_beam") return BeamReduction::kMinBeam;
  if (s == "any_beam") return BeamReduction::kAnyBeam;
  throw ConfigError("unknown beam reduction '" + std::string(s) + "'");
}

void SensorNetConfig::validate() const {
  if (!(range > 0) || !std::isfinite(range)) {
    throw ConfigError("sensor range must be positive");
  }
  if (count < 1) throw ConfigError("sensor count must be >= 1");
  if (grid < 2) throw ConfigError("beam grid must be at least 2x2");
  if (!(diagonal_fov_deg > 0 && diagonal_fov_deg < 180)) {
    throw ConfigError("diagonal field of view must lie in (0, 180) degrees");
  }
  if (reduction != BeamReduction::kFull) {
    if (geometry == SensorGeometry::kField) {
      throw ConfigError("beam reductions apply to ray sensors only");
    }
    if (reduction == BeamReduction::kMinBeam && signal != SignalFn::kProximity) {
      throw ConfigError("min_beam reduction requires the proximity signal");
    }
    if (reduction == BeamReduction::kAnyBeam && signal != SignalFn::kBinary) {
      throw ConfigError("any_beam reduction requires the binary signal");
    }
  }
}

int observation_dim(const SensorNetConfig& config) {
  if (config.signal == SignalFn::kLocalization) return 3;
  if (config.geometry == SensorGeometry::kField) return config.count;
  if (config.reduction != BeamReduction::kFull) return config.count;
  return config.grid * config.grid * config.count;
}

namespace {

double capsule_area(const Capsuled& c) {
  const double pi = std::numbers::pi;
  return 2.0 * pi * c.radius * c.segment_length() +
         4.0 * pi * c.radius * c.radius;
}

// Any unit vector orthogonal to `n`.
Vec3d orthogonal(const Vec3d& n) {
  const Vec3d helper =
      std::abs(n.x()) < 0.9 ? Vec3d::UnitX() : Vec3d::UnitY();
  return n.cross(helper).normalized();
}

Vec3d random_unit(Rng& rng) {
  const double z = uniform(rng, -1.0, 1.0);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

SensorPose sample_on_capsule(int link, const Capsuled& c, Rng& rng) {
  const double len = c.segment_length();
  const double pi = std::numbers::pi;
  const double side = 2.0 * pi * c.radius * len;
  const double total = capsule_area(c);
  Vec3d point;
  Vec3d normal;
  if (len > 0 && uniform(rng, 0.0, total) < side) {
    const Vec3d axis = (c.endpoint_b - c.endpoint_a) / len;
    const Vec3d u = orthogonal(axis);
    const Vec3d v = axis.cross(u);
    const double t = uniform(rng, 0.0, 1.0);
    const double phi = uniform(rng, 0.0, 2.0 * pi);
    normal = std::cos(phi) * u + std::sin(phi) * v;
    point = c.endpoint_a + t * len * axis + c.radius * normal;
  } else {
    // The two end caps together form one full sphere of area 4 pi r^2.
    normal = random_unit(rng);
    if (len > 0) {
      const Vec3d axis = (c.endpoint_b - c.endpoint_a) / len;
      point = (normal.dot(axis) >= 0 ? c.endpoint_b : c.endpoint_a) +
              c.radius * normal;
    } else {
      point = c.endpoint_a + c.radius * normal;
    }
  }
  SensorPose pose;
  pose.link = link;
  pose.local.position = point;
  pose.local.orientation =
      Rotationd::FromTwoVectors(Vec3d::UnitZ(), normal).normalized();
  return pose;
}

}  // namespace

std::vector<SensorPose> place_sensors(const RobotModel& model,
                                      const SensorNetConfig& config) {
  if (config.count <= 0) throw ConfigError("sensor count must be positive");
  std::vector<int> links;
  std::vector<double> cumulative;
  double total = 0.0;
  for (int i = 0; i < model.num_links(); ++i) {
    if (!model.links[i].upper_body) continue;
    total += capsule_area(model.links[i].capsule);
    links.push_back(i);
    cumulative.push_back(total);
  }
  if (links.empty()) throw ConfigError("robot model has no upper-body links");

  Rng rng(config.placement_seed);
  std::vector<SensorPose> out;
  out.reserve(config.count);
  for (int k = 0; k < config.count; ++k) {
    const double pick = uniform(rng, 0.0, total);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t idx =
        std::min<std::size_t>(it - cumulative.begin(), links.size() - 1);
    const int link = links[idx];
    out.push_back(sample_on_capsule(link, model.links[link].capsule, rng));
  }
  return out;
}

double beam_grid_half_extent(const SensorNetConfig& config) {
  const double half_diag =
      0.5 * config.diagonal_fov_deg * std::numbers::pi / 180.0;
  return std::tan(half_diag) / std::numbers::sqrt2;
}

std::vector<Vec3d> ray_directions(const SensorNetConfig& config) {
  const int n = config.grid;
  const double t = beam_grid_half_extent(config);
  std::vector<Vec3d> dirs;
  dirs.reserve(n * n);
  for (int i = 0; i < n; ++i) {
    const double u = t * (2.0 * i / (n - 1) - 1.0);
    for (int j = 0; j < n; ++j) {
      const double v = t * (2.0 * j / (n - 1) - 1.0);
      dirs.push_back(Vec3d(u, v, 1.0).normalized());
    }
  }
  return dirs;
}

namespace {

constexpr double kNoHit = std::numeric_limits<double>::infinity();

// Nearest ball surface distance seen by one field sensor, or kNoHit.
double field_reading(std::span<const Ball> balls, const Vec3d& origin,
                     double range, int* which) {
  double best = kNoHit;
  for (std::size_t b = 0; b < balls.size(); ++b) {
    const double d =
        std::max(0.0, point_sphere_distance(origin, balls[b].sphere()));
    if (d <= range && d < best) {
      best = d;
      if (which) *which = static_cast<int>(b);
    }
  }
  return best;
}

// Per-beam nearest hit distances (within range) for one ray sensor. Returns
// the smallest over all beams, and the ball responsible for it.
double ray_reading(std::span<const Ball> balls, const Posed& pose,
                   std::span<const Vec3d> beams, double cos_cone,
                   double range, double* per_beam, int* which) {
  if (per_beam) std::fill(per_beam, per_beam + beams.size(), kNoHit);
  double best = kNoHit;
  for (std::size_t b = 0; b < balls.size(); ++b) {
    const Sphered world = balls[b].sphere();
    // No beam can reach a ball whose surface is beyond range.
    if (point_sphere_distance(pose.position, world) > range) continue;
    const Sphered local{inverse_transform_point(pose, world.center),
                        world.radius};
    // Skip balls entirely outside the beam cone (widened by the ball's
    // angular radius). Origins inside the ball always fall through.
    const double dist = local.center.norm();
    if (dist > local.radius) {
      const double cos_center = local.center.z() / dist;
      const double half = std::asin(local.radius / dist);
      if (cos_center < std::cos(std::min(std::acos(cos_cone) + half,
                                         std::numbers::pi))) {
        continue;
      }
    }
    for (std::size_t k = 0; k < beams.size(); ++k) {
      const auto hit = ray_sphere_hit(Rayd{Vec3d::Zero(), beams[k]}, local);
      if (!hit || *hit > range) continue;
      if (per_beam && *hit < per_beam[k]) per_beam[k] = *hit;
      if (*hit < best) {
        best = *hit;
        if (which) *which = static_cast<int>(b);
      }
    }
  }
  return best;
}

}  // namespace

void sense(std::span<const Ball> balls, std::span<const Posed> sensor_poses,
           const SensorNetConfig& config, std::span<const Vec3d> beams,
           const Posed& base, Eigen::Ref<Eigen::VectorXd> out) {
  const int s_count = static_cast<int>(sensor_poses.size());
  const double range = config.range;
  const bool ray = config.geometry == SensorGeometry::kRayGrid;
  // Widest beam angle, slightly padded so culling never drops a real hit.
  double cos_cone = 1.0;
  for (const Vec3d& b : beams) cos_cone = std::min(cos_cone, b.z());
  cos_cone = std::cos(std::acos(cos_cone) + 1e-6);

  if (config.signal == SignalFn::kLocalization) {
    double best = kNoHit;
    int best_ball = -1;
    for (int s = 0; s < s_count; ++s) {
      int which = -1;
      const double d =
          ray ? ray_reading(balls, sensor_poses[s], beams, cos_cone, range,
                            nullptr, &which)
              : field_reading(balls, sensor_poses[s].position, range, &which);
      if (d < best) {
        best = d;
        best_ball = which;
      }
    }
    out.setZero();
    if (best_ball >= 0) {
      out = inverse_transform_point(base, balls[best_ball].position);
    }
    return;
  }

  const bool binary = config.signal == SignalFn::kBinary;
  auto encode = [&](double d) {
    if (binary) return d <= range ? 1.0 : 0.0;
    if (!(d <= range)) return 1.0;
    return std::clamp(d / range, 0.0, 1.0);
  };

  if (!ray) {
    for (int s = 0; s < s_count; ++s) {
      out[s] = encode(field_reading(balls, sensor_poses[s].position, range,
                                    nullptr));
    }
    return;
  }

  const int beams_per = static_cast<int>(beams.size());
  if (config.reduction == BeamReduction::kFull) {
    for (int s = 0; s < s_count; ++s) {
      double* row = out.data() + static_cast<std::ptrdiff_t>(s) * beams_per;
      ray_reading(balls, sensor_poses[s], beams, cos_cone, range, row,
                  nullptr);
      for (int k = 0; k < beams_per; ++k) row[k] = encode(row[k]);
    }
    return;
  }
  // min_beam: minimum normalized depth; any_beam: any beam detects. Both
  // reduce to the nearest hit over the sensor's beams.
  for (int s = 0; s < s_count; ++s) {
    out[s] = encode(ray_reading(balls, sensor_poses[s], beams, cos_cone,
                                range, nullptr, nullptr));
  }
}

Eigen::VectorXd sense(std::span<const Ball> balls,
                      std::span<const Posed> sensor_poses,
                      const SensorNetConfig& config, const Posed& base) {
  SensorNetConfig c = config;
  c.count = static_cast<int>(sensor_poses.size());
  const std::vector<Vec3d> beams = ray_directions(c);
  Eigen::VectorXd out(observation_dim(c));
  sense(balls, sensor_poses, c, beams, base, out);
  return out;
}

SensorNet::SensorNet(const RobotModel& model, SensorNetConfig config)
    : config_(std::move(config)) {
  config_.validate();
  placements_ = place_sensors(model, config_);
  beams_ = ray_directions(config_);
}

void SensorNet::world_poses(const std::vector<Posed>& link_poses,
                            std::vector<Posed>& out) const {
  out.resize(placements_.size());
  for (std::size_t i = 0; i < placements_.size(); ++i) {
    out[i] = link_poses[placements_[i].link] * placements_[i].local;
  }
}

void SensorNet::sense(std::span<const Ball> balls,
                      std::span<const Posed> sensor_poses, const Posed& base,
                      Eigen::Ref<Eigen::VectorXd> out) const {
  dodge::sense(balls, sensor_poses, config_, beams_, base, out);
}

void write_placements_csv(std::ostream& os, const RobotModel& model,
                          const std::vector<SensorPose>& placements) {
  const LinkFrames frames = forward_kinematics(model, rest_state(model));
  os << "sensor_id,link,x,y,z,nx,ny,nz\n";
  char buf[256];
  for (std::size_t i = 0; i < placements.size(); ++i) {
    const SensorPose& sp = placements[i];
    const Posed world = frames.link_poses[sp.link] * sp.local;
    const Vec3d n = world.orientation * Vec3d::UnitZ();
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  i, model.links[sp.link].name.c_str(), world.position.x(),
                  world.position.y(), world.position.z(), n.x(), n.y(), n.z());
    os << buf;
  }
}

}  // namespace dodge
