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

#include "dodge/train.hpp"

#include <filesystem>
#include <fstream>

#include "dodge/errors.hpp"
#include "dodge/parallel.hpp"

namespace dodge {

std::shared_ptr<const DodgeEnv> make_env(const RunConfig& config) {
  config.validate();
  return std::make_shared<const DodgeEnv>(config.robot, config.sensors,
                                          config.env);
}

std::string sidecar_path(const std::string& checkpoint_path) {
  std::filesystem::path p(checkpoint_path);
  p.replace_extension(".json");
  return p.string();
}

void save_policy(const std::string& path, const PolicyParams& params,
                 const RunConfig& config) {
  save_checkpoint(path, params);
  Json meta = {{"format", "DODGECK1"},
               {"actor_dim", params.actor_dim()},
               {"critic_dim", params.critic_dim()},
               {"action_dim", params.action_dim()},
               {"hidden", {kHiddenUnits, kHiddenUnits}},
               {"activation", "tanh"},
               {"num_params", params.num_params()},
               {"config", to_json(config)}};
  write_json_file(sidecar_path(path), meta);
}

LoadedPolicy load_policy(const std::string& path) {
  LoadedPolicy out;
  out.params = load_checkpoint(path);
  const Json meta = read_json_file(sidecar_path(path));
  if (!meta.contains("config")) {
    throw ConfigError("checkpoint sidecar lacks a config section");
  }
  merge_json(meta["config"], out.config);
  return out;
}

TrainResult train_dodge(const RunConfig& config, const std::string& out_dir,
                        int workers) {
  const auto env = make_env(config);
  BatchedDodgeEnv batched(env, config.ppo.num_envs, derive_seed(config.seed, 1),
                          workers);
  std::ofstream curve;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json_file(out_dir + "/config.json", to_json(config));
    curve.open(out_dir + "/curve.csv", std::ios::trunc);
    if (!curve) throw RuntimeFault("cannot write " + out_dir + "/curve.csv");
    write_curve_header(curve);
    curve.flush();
  }
  TrainOutput trained = train_ppo(
      batched, config.ppo, config.seed, config.iterations, workers,
      [&](const IterationRecord& rec, const PolicyParams&) {
        if (curve.is_open()) {
          write_curve_row(curve, rec);
          curve.flush();
        }
      });
  if (!out_dir.empty()) {
    if (!curve) throw RuntimeFault("failed writing curve.csv");
    save_policy(out_dir + "/checkpoint.bin", trained.params, config);
  }
  return {std::move(trained.curve), std::move(trained.params)};
}

EvalStats evaluate(const DodgeEnv& env, const PolicyParams& params,
                   int episodes, std::uint64_t seed, int workers) {
  if (episodes < 1) throw ConfigError("eval: episodes must be >= 1");
  if (params.actor_dim() != env.actor_dim() ||
      params.action_dim() != env.num_actions()) {
    throw ConfigError("checkpoint does not match the environment dimensions");
  }
  struct Outcome {
    int length = 0;
    StepInfo info;
  };
  std::vector<Outcome> outcomes(episodes);
  parallel_for(episodes, workers, [&](std::size_t i) {
    EpisodeState ep = env.reset(derive_seed(seed, i));
    Eigen::VectorXd actor(env.actor_dim()), critic(env.critic_dim());
    env.observe(ep, actor, critic);
    MatrixR obs(env.actor_dim(), 1);
    while (true) {
      obs.col(0) = actor.cast<Real>();
      const Eigen::VectorXd action =
          params.actor.forward(obs, nullptr).col(0).cast<double>();
      double reward;
      bool term, trunc;
      const StepInfo info = env.step_into(ep, action, reward, term, trunc);
      if (term || trunc) {
        outcomes[i] = {ep.steps, info};
        break;
      }
      env.observe(ep, actor, critic);
    }
  });
  EvalStats s;
  s.episodes = episodes;
  for (const Outcome& o : outcomes) {
    s.mean_episode_length += o.length;
    s.success_rate += o.info.success;
    s.contact_rate += o.info.contact;
    s.fall_rate += o.info.fall && !o.info.contact;
  }
  s.mean_episode_length /= episodes;
  s.success_rate /= episodes;
  s.contact_rate /= episodes;
  s.fall_rate /= episodes;
  return s;
}

std::vector<ReplayFrame> record_episode(const DodgeEnv& env,
                                        const PolicyParams& params,
                                        std::uint64_t seed) {
  std::vector<ReplayFrame> frames;
  EpisodeState ep = env.reset(seed);
  Eigen::VectorXd actor(env.actor_dim()), critic(env.critic_dim());
  MatrixR obs(env.actor_dim(), 1);
  frames.push_back(capture_frame(env, ep));
  while (!ep.finished) {
    env.observe(ep, actor, critic);
    obs.col(0) = actor.cast<Real>();
    const Eigen::VectorXd action =
        params.actor.forward(obs, nullptr).col(0).cast<double>();
    double reward;
    bool term, trunc;
    env.step_into(ep, action, reward, term, trunc);
    frames.push_back(capture_frame(env, ep));
  }
  return frames;
}

}  // namespace dodge
