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

// dodge: train, evaluate and inspect dodging policies.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dodge/ablation.hpp"
#include "dodge/errors.hpp"
#include "dodge/parallel.hpp"
#include "dodge/train.hpp"

namespace {

using namespace dodge;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string out_root() {
  const char* env = std::getenv("DODGE_OUT_ROOT");
  return env && *env ? std::string(env) : std::string("runs");
}

void echo(const std::string& command, const Json& resolved) {
  std::cerr << "dodge " << command << " config: " << resolved.dump() << "\n";
}

void require_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("no such file: " + path);
  }
}

RunConfig base_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  require_file(path);
  return load_run_config(path);
}

std::ofstream open_out(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw RuntimeFault("cannot write " + path);
  return os;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-body dodgeball avoidance with distributed proximity sensors"};
  app.require_subcommand(1);
  int workers = default_workers();
  app.add_option("--workers", workers, "Worker threads (caps all parallelism)")
      ->check(CLI::PositiveNumber);

  std::string config_path, out_path, checkpoint_path, grid_path, dump_word;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> iters_flag, envs_flag;
  int episodes = 100;
  bool resume = false;

  CLI::App* train = app.add_subcommand("train", "Train a policy with PPO");
  train->add_option("--config", config_path, "Run config JSON");
  train->add_option("--seed", seed_flag, "Base seed");
  train->add_option("--iters", iters_flag, "PPO iterations")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--num-envs", envs_flag, "Parallel environments")
      ->check(CLI::PositiveNumber);
  train->add_option("--out", out_path, "Output directory");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  eval->add_option("--episodes", episodes, "Episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed_flag, "Evaluation seed");

  CLI::App* ablate = app.add_subcommand("ablate", "Run a sensor ablation grid");
  ablate->add_option("--grid", grid_path, "Grid JSON")->required();
  ablate->add_option("--out", out_path, "Output directory");
  ablate->add_flag("--resume", resume, "Reuse finished records");

  CLI::App* sensors = app.add_subcommand("sensors", "Dump sensor placements");
  sensors->add_option("action", dump_word, "Optional 'dump'")
      ->check(CLI::IsMember({"dump"}));
  sensors->add_option("--config", config_path, "Run config JSON");
  sensors->add_option("--out", out_path, "CSV path (stdout if omitted)");

  CLI::App* replay = app.add_subcommand("replay", "Export one episode as CSV");
  replay->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  replay->add_option("--seed", seed_flag, "Episode seed");
  replay->add_option("--out", out_path, "CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "dodge: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (train->parsed()) {
      RunConfig cfg = base_config(config_path);
      if (seed_flag) cfg.seed = *seed_flag;
      if (iters_flag) cfg.iterations = *iters_flag;
      if (envs_flag) cfg.ppo.num_envs = *envs_flag;
      cfg.validate();
      if (out_path.empty()) {
        out_path = out_root() + "/train-s" + std::to_string(cfg.seed);
      }
      echo("train", to_json(cfg));
      const TrainResult result = train_dodge(cfg, out_path, workers);
      if (!result.curve.empty()) {
        const IterationRecord& last = result.curve.back();
        std::printf("iterations %d  final mean_ep_len %.3f  mean_reward %.4f\n",
                    static_cast<int>(result.curve.size()),
                    last.mean_episode_length, last.mean_reward);
      }
      std::printf("wrote %s\n", out_path.c_str());
    } else if (eval->parsed()) {
      require_file(checkpoint_path);
      const LoadedPolicy loaded = load_policy(checkpoint_path);
      const std::uint64_t seed = seed_flag.value_or(1);
      Json resolved = to_json(loaded.config);
      resolved["eval"] = {{"checkpoint", checkpoint_path},
                          {"episodes", episodes},
                          {"seed", seed}};
      echo("eval", resolved);
      const auto env = make_env(loaded.config);
      const EvalStats s = evaluate(*env, loaded.params, episodes, seed, workers);
      std::printf("episodes %d\n", s.episodes);
      std::printf("mean_episode_length %.4f\n", s.mean_episode_length);
      std::printf("success_rate %.4f\n", s.success_rate);
      std::printf("contact_rate %.4f\n", s.contact_rate);
      std::printf("fall_rate %.4f\n", s.fall_rate);
    } else if (ablate->parsed()) {
      require_file(grid_path);
      const ExperimentGrid grid = load_grid(grid_path);
      if (out_path.empty()) out_path = out_root() + "/ablate";
      echo("ablate", to_json(grid));
      const std::size_t total = grid.cells.size() * grid.seeds;
      std::size_t done = 0;
      const std::vector<RunRecord> records = run_grid(
          grid, out_path, resume, workers,
          [&](const RunRecord& r, bool resumed) {
            ++done;
            std::fprintf(stderr, "[%zu/%zu] %s seed %d %s%s\n", done, total,
                         r.cell_id.c_str(), r.seed_index,
                         resumed ? "resumed" : (r.failed ? "FAILED" : "done"),
                         r.failed ? (": " + r.error).c_str() : "");
          });
      const std::vector<IqrSummary> summaries =
          summarize(grid, records, [](const std::string& msg) {
            std::cerr << "warning: " << msg << "\n";
          });
      export_summaries(grid, summaries, records, out_path);
      for (const IqrSummary& s : summaries) {
        std::printf("%-36s final-window mean %.3f (%zu retained)\n",
                    s.cell_id.c_str(), s.retained_metric_mean,
                    s.retained_seeds.size());
      }
      std::printf("wrote %s\n", out_path.c_str());
    } else if (sensors->parsed()) {
      const RunConfig cfg = base_config(config_path);
      cfg.validate();
      echo("sensors", to_json(cfg));
      const auto placements = place_sensors(cfg.robot, cfg.sensors);
      if (out_path.empty()) {
        write_placements_csv(std::cout, cfg.robot, placements);
      } else {
        std::ofstream os = open_out(out_path);
        write_placements_csv(os, cfg.robot, placements);
        if (!os) throw RuntimeFault("failed writing " + out_path);
      }
    } else if (replay->parsed()) {
      require_file(checkpoint_path);
      const LoadedPolicy loaded = load_policy(checkpoint_path);
      const std::uint64_t seed = seed_flag.value_or(1);
      if (out_path.empty()) {
        out_path = out_root() + "/replay-s" + std::to_string(seed) + ".csv";
      }
      Json resolved = to_json(loaded.config);
      resolved["replay"] = {{"checkpoint", checkpoint_path}, {"seed", seed}};
      echo("replay", resolved);
      const auto env = make_env(loaded.config);
      const auto frames = record_episode(*env, loaded.params, seed);
      std::ofstream os = open_out(out_path);
      write_replay_csv(os, loaded.config.robot, frames);
      if (!os) throw RuntimeFault("failed writing " + out_path);
      std::printf("%zu frames -> %s\n", frames.size(), out_path.c_str());
    }
  } catch (const ConfigError& e) {
    std::cerr << "dodge: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "dodge: usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "dodge: runtime fault: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
