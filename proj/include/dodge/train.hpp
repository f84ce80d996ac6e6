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
#include <memory>
#include <string>
#include <vector>

#include "dodge/arena.hpp"
#include "dodge/config.hpp"
#include "dodge/policy.hpp"
#include "dodge/ppo.hpp"

namespace dodge {

std::shared_ptr<const DodgeEnv> make_env(const RunConfig& config);

struct TrainResult {
  std::vector<IterationRecord> curve;
  PolicyParams params;
};

// Trains on the dodgeball task. With a non-empty `out_dir`, writes
// config.json (resolved config), curve.csv (one row per iteration, appended
// as training proceeds), checkpoint.bin and its checkpoint.json sidecar.
TrainResult train_dodge(const RunConfig& config, const std::string& out_dir,
                        int workers);

// Sidecar holds the run config used to rebuild the environment.
void save_policy(const std::string& path, const PolicyParams& params,
                 const RunConfig& config);

struct LoadedPolicy {
  PolicyParams params;
  RunConfig config;
};
LoadedPolicy load_policy(const std::string& path);
std::string sidecar_path(const std::string& checkpoint_path);

struct EvalStats {
  int episodes = 0;
  double mean_episode_length = 0.0;  // control steps
  double success_rate = 0.0;
  double contact_rate = 0.0;
  double fall_rate = 0.0;
};

// Runs `episodes` episodes with the policy's mean action.
EvalStats evaluate(const DodgeEnv& env, const PolicyParams& params,
                   int episodes, std::uint64_t seed, int workers);

// One mean-action episode recorded frame by frame.
std::vector<ReplayFrame> record_episode(const DodgeEnv& env,
                                        const PolicyParams& params,
                                        std::uint64_t seed);

}  // namespace dodge
