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

#include <cstdint>
#include <string>

#include <json.hpp>

#include "dodge/arena.hpp"
#include "dodge/ppo.hpp"
#include "dodge/robot.hpp"
#include "dodge/sensors.hpp"

namespace dodge {

using Json = nlohmann::json;

// Everything needed to reproduce one training run.
struct RunConfig {
  RobotModel robot = default_robot_model();
  SensorNetConfig sensors;
  EnvConfig env;
  PpoConfig ppo;
  std::uint64_t seed = 1;
  int iterations = 300;

  void validate() const;
};

// JSON <-> config. Readers start from the given value and overwrite only
// the keys present, so partial files act as overrides; unknown keys are
// rejected with ConfigError.
Json to_json(const RobotModel& m);
Json to_json(const SensorNetConfig& c);
Json to_json(const EnvConfig& c);
Json to_json(const PpoConfig& c);
Json to_json(const RunConfig& c);

void merge_json(const Json& j, RobotModel& m);
void merge_json(const Json& j, SensorNetConfig& c);
void merge_json(const Json& j, EnvConfig& c);
void merge_json(const Json& j, PpoConfig& c);
void merge_json(const Json& j, RunConfig& c);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

// Defaults overridden by the file at `path` (if non-empty).
RunConfig load_run_config(const std::string& path);

// Robot section may reference a separate model file via {"file": path},
// resolved relative to the referencing file's directory.
RobotModel load_robot_model(const std::string& path);

// Stable 64-bit FNV-1a hash of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const Json& j);

}  // namespace dodge
