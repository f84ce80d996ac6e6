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

#include "dodge/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>

#include "dodge/errors.hpp"
#include "dodge/parallel.hpp"
#include "dodge/train.hpp"

namespace dodge {

namespace fs = std::filesystem;

std::string GridCell::id() const {
  char r[32];
  std::snprintf(r, sizeof(r), "%g", range);
  return std::string(to_string(geometry)) + "-" + std::string(to_string(signal)) +
         "-" + std::string(to_string(reduction)) + "-r" + r;
}

void ExperimentGrid::validate() const {
  if (cells.empty()) throw ConfigError("grid: no cells");
  if (seeds < 2) throw ConfigError("grid: seeds must be >= 2");
  if (iterations < 1) throw ConfigError("grid: iterations must be >= 1");
  if (num_envs < 1) throw ConfigError("grid: num_envs must be >= 1");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t k = i + 1; k < cells.size(); ++k) {
      if (cells[i].id() == cells[k].id()) {
        throw ConfigError("grid: duplicate cell " + cells[i].id());
      }
    }
    run_config(cells[i], 0).validate();
  }
}

RunConfig ExperimentGrid::run_config(const GridCell& cell,
                                     int seed_index) const {
  RunConfig c = base;
  c.sensors.geometry = cell.geometry;
  c.sensors.signal = cell.signal;
  c.sensors.reduction = cell.reduction;
  c.sensors.range = cell.range;
  c.ppo.num_envs = num_envs;
  c.iterations = iterations;
  c.seed = seed_for(seed_index);
  return c;
}

ExperimentGrid default_full_grid() {
  ExperimentGrid g;
  const double ranges[] = {0.2, 0.5, 1.0, 2.0};
  for (SensorGeometry geo : {SensorGeometry::kRayGrid, SensorGeometry::kField}) {
    for (SignalFn fn :
         {SignalFn::kLocalization, SignalFn::kProximity, SignalFn::kBinary}) {
      for (double r : ranges) {
        g.cells.push_back({geo, fn, BeamReduction::kFull, r});
      }
    }
  }
  for (double r : ranges) {
    g.cells.push_back({SensorGeometry::kRayGrid, SignalFn::kProximity,
                       BeamReduction::kMinBeam, r});
    g.cells.push_back({SensorGeometry::kRayGrid, SignalFn::kBinary,
                       BeamReduction::kAnyBeam, r});
  }
  return g;
}

Json to_json(const ExperimentGrid& g) {
  Json cells = Json::array();
  for (const GridCell& c : g.cells) {
    cells.push_back({{"geometry", std::string(to_string(c.geometry))},
                     {"signal", std::string(to_string(c.signal))},
                     {"reduction", std::string(to_string(c.reduction))},
                     {"range", c.range}});
  }
  Json base = to_json(g.base);
  base.erase("seed");
  base.erase("iterations");
  return {{"cells", cells},         {"seeds", g.seeds},
          {"base_seed", g.base_seed}, {"iterations", g.iterations},
          {"num_envs", g.num_envs}, {"base", base}};
}

ExperimentGrid grid_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("grid: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "cells" && key != "preset" && key != "seeds" &&
        key != "base_seed" && key != "iterations" && key != "num_envs" &&
        key != "base") {
      throw ConfigError("grid: unknown key '" + key + "'");
    }
  }
  ExperimentGrid g;
  if (j.contains("preset")) {
    if (j["preset"] != "full") {
      throw ConfigError("grid: unknown preset " + j["preset"].dump());
    }
    g = default_full_grid();
  }
  try {
    if (j.contains("cells")) {
      g.cells.clear();
      for (const Json& c : j["cells"]) {
        for (const auto& [key, _] : c.items()) {
          if (key != "geometry" && key != "signal" && key != "reduction" &&
              key != "range") {
            throw ConfigError("grid.cells[]: unknown key '" + key + "'");
          }
        }
        GridCell cell;
        cell.geometry = parse_geometry(c.at("geometry").get<std::string>());
        cell.signal = parse_signal(c.at("signal").get<std::string>());
        cell.reduction =
            parse_reduction(c.value("reduction", std::string("full")));
        cell.range = c.at("range").get<double>();
        g.cells.push_back(cell);
      }
    }
    if (j.contains("seeds")) g.seeds = j["seeds"].get<int>();
    if (j.contains("base_seed")) g.base_seed = j["base_seed"].get<std::uint64_t>();
    if (j.contains("iterations")) g.iterations = j["iterations"].get<int>();
    if (j.contains("num_envs")) g.num_envs = j["num_envs"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  if (j.contains("base")) merge_json(j["base"], g.base);
  return g;
}

ExperimentGrid load_grid(const std::string& path) {
  ExperimentGrid g = grid_from_json(read_json_file(path));
  g.validate();
  return g;
}

bool same_grid(const ExperimentGrid& a, const ExperimentGrid& b) {
  return to_json(a) == to_json(b);
}

Json to_json(const RunRecord& r) {
  return {{"cell", r.cell_id},
          {"seed_index", r.seed_index},
          {"seed", r.seed},
          {"failed", r.failed},
          {"error", r.error},
          {"episode_length", r.episode_length},
          {"reward", r.reward},
          {"wall_time", r.wall_time},
          {"config_hash", r.config_hash}};
}

RunRecord record_from_json(const Json& j) {
  RunRecord r;
  try {
    r.cell_id = j.at("cell").get<std::string>();
    r.seed_index = j.at("seed_index").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.failed = j.at("failed").get<bool>();
    r.error = j.value("error", std::string());
    r.episode_length = j.at("episode_length").get<std::vector<double>>();
    r.reward = j.at("reward").get<std::vector<double>>();
    r.wall_time = j.value("wall_time", 0.0);
    r.config_hash = j.value("config_hash", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run record: ") + e.what());
  }
  return r;
}

namespace {

std::string record_path(const std::string& out_dir, const std::string& cell,
                        int seed_index) {
  return out_dir + "/records/" + cell + "__s" + std::to_string(seed_index) +
         ".json";
}

std::string file_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_hash(Json(ss.str()));
}

}  // namespace

std::vector<RunRecord> run_grid(const ExperimentGrid& grid,
                                const std::string& out_dir, bool resume,
                                int workers, const RunProgress& progress) {
  grid.validate();
  if (!out_dir.empty()) fs::create_directories(out_dir + "/records");
  struct Job {
    const GridCell* cell;
    int seed_index;
  };
  std::vector<Job> jobs;
  for (const GridCell& c : grid.cells) {
    for (int s = 0; s < grid.seeds; ++s) jobs.push_back({&c, s});
  }
  std::vector<RunRecord> records(jobs.size());
  std::mutex progress_mutex;
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const RunConfig config = grid.run_config(*job.cell, job.seed_index);
    const std::string hash = config_hash(to_json(config));
    const std::string id = job.cell->id();
    const std::string path =
        out_dir.empty() ? std::string() : record_path(out_dir, id, job.seed_index);
    if (resume && !path.empty() && fs::exists(path)) {
      try {
        RunRecord existing = record_from_json(read_json_file(path));
        if (existing.config_hash == hash &&
            (existing.failed ||
             static_cast<int>(existing.episode_length.size()) ==
                 grid.iterations)) {
          records[i] = std::move(existing);
          if (progress) {
            std::lock_guard<std::mutex> lock(progress_mutex);
            progress(records[i], true);
          }
          return;
        }
      } catch (const ConfigError&) {
        // Unreadable record: rerun.
      }
    }
    RunRecord rec;
    rec.cell_id = id;
    rec.seed_index = job.seed_index;
    rec.seed = config.seed;
    rec.config_hash = hash;
    const auto start = std::chrono::steady_clock::now();
    try {
      const TrainResult result = train_dodge(config, std::string(), 1);
      for (const IterationRecord& it : result.curve) {
        rec.episode_length.push_back(it.mean_episode_length);
        rec.reward.push_back(it.mean_reward);
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.episode_length.clear();
      rec.reward.clear();
    }
    rec.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    if (!path.empty()) {
      const std::string tmp = path + ".tmp";
      write_json_file(tmp, to_json(rec));
      fs::rename(tmp, path);
    }
    records[i] = std::move(rec);
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(records[i], false);
    }
  });
  return records;
}

double final_window_metric(const RunRecord& r) {
  const std::size_t n = r.episode_length.size();
  if (n == 0) return 0.0;
  const std::size_t window = std::max<std::size_t>(1, n / 10);
  double sum = 0.0;
  for (std::size_t i = n - window; i < n; ++i) sum += r.episode_length[i];
  return sum / window;
}

double area_metric(const RunRecord& r) {
  if (r.episode_length.empty()) return 0.0;
  return std::accumulate(r.episode_length.begin(), r.episode_length.end(), 0.0) /
         r.episode_length.size();
}

std::vector<RunRecord> rank_runs(
    const std::vector<RunRecord>& records,
    const std::function<double(const RunRecord&)>& metric) {
  std::vector<RunRecord> ok;
  for (const RunRecord& r : records) {
    if (!r.failed) ok.push_back(r);
  }
  std::vector<double> keys;
  std::vector<std::size_t> order(ok.size());
  std::iota(order.begin(), order.end(), 0);
  for (const RunRecord& r : ok) keys.push_back(metric(r));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return ok[a].seed_index < ok[b].seed_index;
  });
  std::vector<RunRecord> out;
  out.reserve(ok.size());
  for (std::size_t i : order) out.push_back(ok[i]);
  return out;
}

IqrSummary iqr_aggregate(const std::vector<RunRecord>& records) {
  IqrSummary s;
  if (!records.empty()) s.cell_id = records.front().cell_id;
  for (const RunRecord& r : records) s.excluded_failed += r.failed;
  const std::vector<RunRecord> ranked = rank_runs(records);
  if (ranked.empty()) {
    throw RuntimeFault("aggregation: every run failed for cell " + s.cell_id);
  }
  const std::size_t n = ranked.size();
  const std::size_t drop = n / 4;
  const std::size_t keep = n - 2 * drop;
  const std::size_t iters = ranked.front().episode_length.size();
  for (const RunRecord& r : ranked) {
    if (r.episode_length.size() != iters) {
      throw RuntimeFault("aggregation: curve lengths differ in " + s.cell_id);
    }
  }
  s.q25.assign(iters, 0.0);
  s.mean.assign(iters, 0.0);
  s.q75.assign(iters, 0.0);
  for (std::size_t t = 0; t < iters; ++t) {
    double lo = ranked[drop].episode_length[t];
    double hi = lo;
    double sum = 0.0;
    for (std::size_t k = drop; k < drop + keep; ++k) {
      const double v = ranked[k].episode_length[t];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    s.q25[t] = lo;
    s.q75[t] = hi;
    s.mean[t] = sum / keep;
  }
  double metric_sum = 0.0;
  for (std::size_t k = drop; k < drop + keep; ++k) {
    s.retained_seeds.push_back(ranked[k].seed_index);
    metric_sum += final_window_metric(ranked[k]);
  }
  s.retained_metric_mean = metric_sum / keep;
  return s;
}

std::vector<IqrSummary> summarize(
    const ExperimentGrid& grid, const std::vector<RunRecord>& records,
    const std::function<void(const std::string&)>& warn) {
  std::vector<IqrSummary> out;
  for (const GridCell& cell : grid.cells) {
    const std::string id = cell.id();
    std::vector<RunRecord> group;
    for (const RunRecord& r : records) {
      if (r.cell_id != id) continue;
      if (r.failed && warn) {
        warn("run " + id + " seed " + std::to_string(r.seed_index) +
             " failed and is excluded: " + r.error);
      }
      group.push_back(r);
    }
    try {
      out.push_back(iqr_aggregate(group));
    } catch (const RuntimeFault& e) {
      if (warn) warn(e.what());
    }
  }
  return out;
}

Json make_manifest(const ExperimentGrid& grid,
                   const std::vector<RunRecord>& records) {
  Json runs = Json::array();
  for (const RunRecord& r : records) {
    runs.push_back({{"cell", r.cell_id},
                    {"seed_index", r.seed_index},
                    {"seed", r.seed},
                    {"failed", r.failed},
                    {"config_hash", r.config_hash}});
  }
  Json cell_hashes = Json::object();
  for (const GridCell& c : grid.cells) {
    cell_hashes[c.id()] = config_hash(to_json(grid.run_config(c, 0)));
  }
  const Json g = to_json(grid);
  return {{"grid", g},
          {"grid_hash", config_hash(g)},
          {"cell_config_hashes", cell_hashes},
          {"runs", runs}};
}

void export_summaries(const ExperimentGrid& grid,
                      const std::vector<IqrSummary>& summaries,
                      const std::vector<RunRecord>& records,
                      const std::string& out_dir) {
  fs::create_directories(out_dir + "/summaries");
  std::ofstream all(out_dir + "/summaries/summary.csv", std::ios::trunc);
  if (!all) throw RuntimeFault("cannot write summaries/summary.csv");
  all << "cell,iteration,q25,mean,q75\n";
  char buf[256];
  for (const IqrSummary& s : summaries) {
    std::ofstream one(out_dir + "/summaries/" + s.cell_id + ".csv",
                      std::ios::trunc);
    if (!one) throw RuntimeFault("cannot write summary for " + s.cell_id);
    one << "iteration,q25,mean,q75\n";
    for (std::size_t t = 0; t < s.mean.size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g\n", t, s.q25[t],
                    s.mean[t], s.q75[t]);
      one << buf;
      all << s.cell_id << ',' << buf;
    }
    if (!one) throw RuntimeFault("failed writing summary for " + s.cell_id);
  }
  if (!all) throw RuntimeFault("failed writing summaries/summary.csv");
  Json manifest = make_manifest(grid, records);
  Json files = Json::object();
  for (const RunRecord& r : records) {
    const std::string p = record_path(out_dir, r.cell_id, r.seed_index);
    if (fs::exists(p)) {
      files[fs::path(p).filename().string()] = file_hash(p);
    }
  }
  manifest["record_hashes"] = files;
  write_json_file(out_dir + "/manifest.json", manifest);
}

}  // namespace dodge
