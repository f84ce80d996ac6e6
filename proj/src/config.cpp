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

#include "dodge/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>

#include "dodge/errors.hpp"

namespace dodge {

namespace {

void check_keys(const Json& j, const char* section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError(std::string(section) + ": expected a JSON object");
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) {
      throw ConfigError(std::string(section) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const char* section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

Json vec_json(const Vec3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3d vec_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(std::string(what) + ": expected [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json pose_json(const Posed& p) {
  const Rotationd& q = p.orientation;
  return {{"xyz", vec_json(p.position)},
          {"quat", Json::array({q.w(), q.x(), q.y(), q.z()})}};
}

Posed pose_from(const Json& j, const char* what) {
  check_keys(j, what, {"xyz", "quat"});
  Posed p;
  if (j.contains("xyz")) p.position = vec_from(j["xyz"], what);
  if (j.contains("quat")) {
    const Json& q = j["quat"];
    if (!q.is_array() || q.size() != 4) {
      throw ConfigError(std::string(what) + ": quat must be [w, x, y, z]");
    }
    p.orientation = Rotationd(q[0].get<double>(), q[1].get<double>(),
                              q[2].get<double>(), q[3].get<double>());
    if (std::abs(p.orientation.norm() - 1.0) > 1e-9) {
      throw ConfigError(std::string(what) + ": quat must be unit norm");
    }
  }
  return p;
}

Json range_json(const Range& r) { return Json::array({r.lo, r.hi}); }

void read_range(const Json& j, const char* key, Range& r) {
  if (!j.contains(key)) return;
  const Json& v = j[key];
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(std::string("env.") + key + ": expected [lo, hi]");
  }
  r.lo = v[0].get<double>();
  r.hi = v[1].get<double>();
}

}  // namespace

Json to_json(const RobotModel& m) {
  Json joints = Json::array();
  for (const JointSpec& js : m.joints) {
    joints.push_back({{"name", js.name},
                      {"parent", js.parent < 0 ? std::string("base")
                                               : m.joints[js.parent].name},
                      {"origin", pose_json(js.origin)},
                      {"axis", vec_json(js.axis)},
                      {"q_min", js.q_min},
                      {"q_max", js.q_max},
                      {"q_default", js.q_default},
                      {"kp", js.kp},
                      {"kd", js.kd},
                      {"torque_limit", js.torque_limit},
                      {"inertia", js.inertia},
                      {"damping", js.damping}});
  }
  Json links = Json::array();
  for (const LinkSpec& ls : m.links) {
    links.push_back(
        {{"name", ls.name},
         {"parent", ls.parent_joint < 0 ? std::string("base")
                                        : m.joints[ls.parent_joint].name},
         {"attach", pose_json(ls.attach)},
         {"capsule",
          {{"a", vec_json(ls.capsule.endpoint_a)},
           {"b", vec_json(ls.capsule.endpoint_b)},
           {"radius", ls.capsule.radius}}},
         {"mass", ls.mass},
         {"com", vec_json(ls.com_offset)},
         {"upper_body", ls.upper_body}});
  }
  return {{"base_height", m.base_height},
          {"pendulum_length", m.pendulum_length},
          {"tilt_gain", m.tilt_gain},
          {"tilt_damping", m.tilt_damping},
          {"fall_threshold", m.fall_threshold},
          {"joints", joints},
          {"links", links}};
}

void merge_json(const Json& j, RobotModel& m) {
  const char* s = "robot";
  check_keys(j, s,
             {"base_height", "pendulum_length", "tilt_gain", "tilt_damping",
              "fall_threshold", "gains", "joints", "links", "file"});
  read(j, "base_height", m.base_height, s);
  read(j, "pendulum_length", m.pendulum_length, s);
  read(j, "tilt_gain", m.tilt_gain, s);
  read(j, "tilt_damping", m.tilt_damping, s);
  read(j, "fall_threshold", m.fall_threshold, s);

  // Shared gains first so per-joint entries can override them.
  JointSpec shared;
  bool have_shared = false;
  if (j.contains("gains")) {
    const Json& g = j["gains"];
    check_keys(g, "robot.gains",
               {"kp", "kd", "torque_limit", "inertia", "damping"});
    for (JointSpec& js : m.joints) {
      read(g, "kp", js.kp, "robot.gains");
      read(g, "kd", js.kd, "robot.gains");
      read(g, "torque_limit", js.torque_limit, "robot.gains");
      read(g, "inertia", js.inertia, "robot.gains");
      read(g, "damping", js.damping, "robot.gains");
    }
    shared = m.joints.empty() ? JointSpec{} : m.joints.front();
    read(g, "kp", shared.kp, "robot.gains");
    read(g, "kd", shared.kd, "robot.gains");
    read(g, "torque_limit", shared.torque_limit, "robot.gains");
    read(g, "inertia", shared.inertia, "robot.gains");
    read(g, "damping", shared.damping, "robot.gains");
    have_shared = true;
  }

  if (j.contains("joints")) {
    std::vector<JointSpec> joints;
    auto find = [&](const std::string& name) {
      if (name == "base") return -1;
      for (std::size_t i = 0; i < joints.size(); ++i) {
        if (joints[i].name == name) return static_cast<int>(i);
      }
      throw ConfigError("robot.joints: unknown parent '" + name +
                        "' (parents must be listed first)");
    };
    for (const Json& jj : j["joints"]) {
      const char* js_s = "robot.joints[]";
      check_keys(jj, js_s,
                 {"name", "parent", "origin", "axis", "q_min", "q_max",
                  "q_default", "kp", "kd", "torque_limit", "inertia",
                  "damping"});
      JointSpec js;
      if (have_shared) {
        js.kp = shared.kp;
        js.kd = shared.kd;
        js.torque_limit = shared.torque_limit;
        js.inertia = shared.inertia;
        js.damping = shared.damping;
      }
      read(jj, "name", js.name, js_s);
      std::string parent = "base";
      read(jj, "parent", parent, js_s);
      js.parent = find(parent);
      if (jj.contains("origin")) js.origin = pose_from(jj["origin"], js_s);
      if (jj.contains("axis")) js.axis = vec_from(jj["axis"], js_s);
      read(jj, "q_min", js.q_min, js_s);
      read(jj, "q_max", js.q_max, js_s);
      read(jj, "q_default", js.q_default, js_s);
      read(jj, "kp", js.kp, js_s);
      read(jj, "kd", js.kd, js_s);
      read(jj, "torque_limit", js.torque_limit, js_s);
      read(jj, "inertia", js.inertia, js_s);
      read(jj, "damping", js.damping, js_s);
      joints.push_back(std::move(js));
    }
    m.joints = std::move(joints);
  }
  if (j.contains("links")) {
    std::vector<LinkSpec> links;
    for (const Json& lj : j["links"]) {
      const char* ls_s = "robot.links[]";
      check_keys(lj, ls_s,
                 {"name", "parent", "attach", "capsule", "mass", "com",
                  "upper_body"});
      LinkSpec ls;
      read(lj, "name", ls.name, ls_s);
      std::string parent = "base";
      read(lj, "parent", parent, ls_s);
      ls.parent_joint = parent == "base" ? -1 : m.joint_index(parent);
      if (parent != "base" && ls.parent_joint < 0) {
        throw ConfigError("robot.links: unknown parent joint '" + parent + "'");
      }
      if (lj.contains("attach")) ls.attach = pose_from(lj["attach"], ls_s);
      if (lj.contains("capsule")) {
        const Json& c = lj["capsule"];
        check_keys(c, "robot.links[].capsule", {"a", "b", "radius"});
        if (c.contains("a")) ls.capsule.endpoint_a = vec_from(c["a"], ls_s);
        if (c.contains("b")) ls.capsule.endpoint_b = vec_from(c["b"], ls_s);
        read(c, "radius", ls.capsule.radius, ls_s);
      }
      read(lj, "mass", ls.mass, ls_s);
      ls.com_offset = 0.5 * (ls.capsule.endpoint_a + ls.capsule.endpoint_b);
      if (lj.contains("com")) ls.com_offset = vec_from(lj["com"], ls_s);
      read(lj, "upper_body", ls.upper_body, ls_s);
      links.push_back(std::move(ls));
    }
    m.links = std::move(links);
  }
}

Json to_json(const SensorNetConfig& c) {
  return {{"geometry", std::string(to_string(c.geometry))},
          {"signal", std::string(to_string(c.signal))},
          {"reduction", std::string(to_string(c.reduction))},
          {"range", c.range},
          {"count", c.count},
          {"grid", c.grid},
          {"diagonal_fov_deg", c.diagonal_fov_deg},
          {"placement_seed", c.placement_seed}};
}

void merge_json(const Json& j, SensorNetConfig& c) {
  const char* s = "sensors";
  check_keys(j, s,
             {"geometry", "signal", "reduction", "range", "count", "grid",
              "diagonal_fov_deg", "placement_seed"});
  std::string text;
  if (j.contains("geometry")) {
    read(j, "geometry", text, s);
    c.geometry = parse_geometry(text);
  }
  if (j.contains("signal")) {
    read(j, "signal", text, s);
    c.signal = parse_signal(text);
  }
  if (j.contains("reduction")) {
    read(j, "reduction", text, s);
    c.reduction = parse_reduction(text);
  }
  read(j, "range", c.range, s);
  read(j, "count", c.count, s);
  read(j, "grid", c.grid, s);
  read(j, "diagonal_fov_deg", c.diagonal_fov_deg, s);
  read(j, "placement_seed", c.placement_seed, s);
}

Json to_json(const EnvConfig& c) {
  const RewardWeights& w = c.weights;
  return {{"dt_control", c.dt_control},
          {"substeps", c.substeps},
          {"spawn_distance", range_json(c.spawn_distance)},
          {"spawn_height", range_json(c.spawn_height)},
          {"speed", range_json(c.speed)},
          {"throw_interval", range_json(c.throw_interval)},
          {"success_time", c.success_time},
          {"gravity", c.gravity},
          {"cull_distance", c.cull_distance},
          {"ball_radius", c.ball_radius},
          {"max_balls", c.max_balls},
          {"action_scale", c.action_scale},
          {"joint_noise", c.joint_noise},
          {"aim_link", c.aim_link},
          {"aim_radius", c.aim_radius},
          {"ballistic_aim", c.ballistic_aim},
          {"reward_weights",
           {{"alive", w.alive},
            {"energy", w.energy},
            {"posture", w.posture},
            {"drift", w.drift},
            {"action_rate", w.action_rate}}}};
}

void merge_json(const Json& j, EnvConfig& c) {
  const char* s = "env";
  check_keys(j, s,
             {"dt_control", "substeps", "spawn_distance", "spawn_height",
              "speed", "throw_interval", "success_time", "gravity",
              "cull_distance", "ball_radius", "max_balls", "action_scale",
              "joint_noise", "aim_link", "aim_radius", "ballistic_aim",
              "reward_weights"});
  read(j, "dt_control", c.dt_control, s);
  read(j, "substeps", c.substeps, s);
  read_range(j, "spawn_distance", c.spawn_distance);
  read_range(j, "spawn_height", c.spawn_height);
  read_range(j, "speed", c.speed);
  read_range(j, "throw_interval", c.throw_interval);
  read(j, "success_time", c.success_time, s);
  read(j, "gravity", c.gravity, s);
  read(j, "cull_distance", c.cull_distance, s);
  read(j, "ball_radius", c.ball_radius, s);
  read(j, "max_balls", c.max_balls, s);
  read(j, "action_scale", c.action_scale, s);
  read(j, "joint_noise", c.joint_noise, s);
  read(j, "aim_link", c.aim_link, s);
  read(j, "aim_radius", c.aim_radius, s);
  read(j, "ballistic_aim", c.ballistic_aim, s);
  if (j.contains("reward_weights")) {
    const Json& w = j["reward_weights"];
    const char* ws = "env.reward_weights";
    check_keys(w, ws, {"alive", "energy", "posture", "drift", "action_rate"});
    read(w, "alive", c.weights.alive, ws);
    read(w, "energy", c.weights.energy, ws);
    read(w, "posture", c.weights.posture, ws);
    read(w, "drift", c.weights.drift, ws);
    read(w, "action_rate", c.weights.action_rate, ws);
  }
}

Json to_json(const PpoConfig& c) {
  return {{"gamma", c.gamma},
          {"lambda", c.lambda},
          {"clip", c.clip},
          {"learning_rate", c.learning_rate},
          {"lr_decay", c.lr_decay},
          {"epochs", c.epochs},
          {"minibatches", c.minibatches},
          {"entropy_coef", c.entropy_coef},
          {"value_coef", c.value_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"horizon", c.horizon},
          {"num_envs", c.num_envs},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps}};
}

void merge_json(const Json& j, PpoConfig& c) {
  const char* s = "ppo";
  check_keys(j, s,
             {"gamma", "lambda", "clip", "learning_rate", "lr_decay", "epochs",
              "minibatches", "entropy_coef", "value_coef", "max_grad_norm",
              "horizon", "num_envs", "adam_beta1", "adam_beta2", "adam_eps"});
  read(j, "gamma", c.gamma, s);
  read(j, "lambda", c.lambda, s);
  read(j, "clip", c.clip, s);
  read(j, "learning_rate", c.learning_rate, s);
  read(j, "lr_decay", c.lr_decay, s);
  read(j, "epochs", c.epochs, s);
  read(j, "minibatches", c.minibatches, s);
  read(j, "entropy_coef", c.entropy_coef, s);
  read(j, "value_coef", c.value_coef, s);
  read(j, "max_grad_norm", c.max_grad_norm, s);
  read(j, "horizon", c.horizon, s);
  read(j, "num_envs", c.num_envs, s);
  read(j, "adam_beta1", c.adam_beta1, s);
  read(j, "adam_beta2", c.adam_beta2, s);
  read(j, "adam_eps", c.adam_eps, s);
}

void RunConfig::validate() const {
  robot.validate();
  sensors.validate();
  env.validate();
  ppo.validate();
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (robot.link_index(env.aim_link) < 0) {
    throw ConfigError("env.aim_link '" + env.aim_link + "' not in robot");
  }
}

Json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"iterations", c.iterations},
          {"robot", to_json(c.robot)},
          {"sensors", to_json(c.sensors)},
          {"env", to_json(c.env)},
          {"ppo", to_json(c.ppo)}};
}

void merge_json(const Json& j, RunConfig& c) {
  check_keys(j, "config",
             {"seed", "iterations", "robot", "sensors", "env", "ppo"});
  read(j, "seed", c.seed, "config");
  read(j, "iterations", c.iterations, "config");
  if (j.contains("robot")) merge_json(j["robot"], c.robot);
  if (j.contains("sensors")) merge_json(j["sensors"], c.sensors);
  if (j.contains("env")) merge_json(j["env"], c.env);
  if (j.contains("ppo")) merge_json(j["ppo"], c.ppo);
}

Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw RuntimeFault("cannot write '" + path + "'");
  os << j.dump(2) << "\n";
  if (!os) throw RuntimeFault("failed writing '" + path + "'");
}

namespace {

// Replaces {"file": ...} in the robot section with the referenced model.
void resolve_robot_file(Json& j, const std::filesystem::path& dir) {
  if (!j.contains("robot") || !j["robot"].contains("file")) return;
  std::filesystem::path p = j["robot"]["file"].get<std::string>();
  if (p.is_relative()) p = dir / p;
  Json model = read_json_file(p.string());
  Json& robot = j["robot"];
  robot.erase("file");
  model.update(robot);
  robot = std::move(model);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  Json j = read_json_file(path);
  resolve_robot_file(j, std::filesystem::path(path).parent_path());
  merge_json(j, c);
  return c;
}

RobotModel load_robot_model(const std::string& path) {
  RobotModel m = default_robot_model();
  merge_json(read_json_file(path), m);
  m.validate();
  return m;
}

std::string config_hash(const Json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dodge
