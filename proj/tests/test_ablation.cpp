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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "dodge/ablation.hpp"
#include "dodge/errors.hpp"

namespace dodge {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

RunRecord constant_run(int seed_index, double value, int iterations = 5) {
  RunRecord r;
  r.cell_id = "cell";
  r.seed_index = seed_index;
  r.seed = 100 + seed_index;
  r.episode_length.assign(iterations, value);
  r.reward.assign(iterations, value / 10);
  return r;
}

TEST(Iqr, TenRunRankFixture) {
  std::vector<RunRecord> runs;
  // Seed index order is scrambled relative to the metric.
  const int values[] = {7, 2, 9, 1, 5, 10, 3, 8, 4, 6};
  for (int i = 0; i < 10; ++i) runs.push_back(constant_run(i, values[i]));
  const IqrSummary s = iqr_aggregate(runs);
  EXPECT_EQ(s.retained_metric_mean, 5.5);
  ASSERT_EQ(s.retained_seeds.size(), 6u);
  std::set<double> kept;
  for (int idx : s.retained_seeds) kept.insert(values[idx]);
  EXPECT_EQ(kept, (std::set<double>{3, 4, 5, 6, 7, 8}));
  for (std::size_t t = 0; t < s.mean.size(); ++t) {
    EXPECT_EQ(s.q25[t], 3.0);
    EXPECT_EQ(s.mean[t], 5.5);
    EXPECT_EQ(s.q75[t], 8.0);
  }
}

TEST(Iqr, FourRunsKeepMiddleTwo) {
  std::vector<RunRecord> runs;
  for (int i = 0; i < 4; ++i) runs.push_back(constant_run(i, 10.0 * (4 - i)));
  const IqrSummary s = iqr_aggregate(runs);
  ASSERT_EQ(s.retained_seeds.size(), 2u);
  EXPECT_EQ(s.q25[0], 20.0);
  EXPECT_EQ(s.q75[0], 30.0);
  EXPECT_EQ(s.mean[0], 25.0);
}

// Ten synthetic curves of 20 iterations that cross each other, so the
// ranking (by the final two iterations) differs from the early ordering.
std::vector<RunRecord> crossing_runs() {
  std::vector<RunRecord> runs;
  for (int i = 0; i < 10; ++i) {
    RunRecord r;
    r.cell_id = "cell";
    r.seed_index = i;
    for (int t = 0; t < 20; ++t) {
      r.episode_length.push_back(50.0 - 2.0 * i + 0.37 * i * t + ((i * 7 + t) % 5));
      r.reward.push_back(t);
    }
    runs.push_back(r);
  }
  return runs;
}

TEST(Iqr, MatchesIndependentRecomputation) {
  const std::vector<RunRecord> runs = crossing_runs();
  // Spreadsheet-style recomputation: final-window metric over the last 2
  // of 20 iterations, sort, keep ranks 3..8, then per-iteration min/mean/max.
  std::vector<std::pair<double, int>> metric;
  for (const RunRecord& r : runs) {
    metric.push_back({(r.episode_length[18] + r.episode_length[19]) / 2, r.seed_index});
  }
  std::sort(metric.begin(), metric.end());
  std::vector<int> kept;
  for (int k = 2; k < 8; ++k) kept.push_back(metric[k].second);
  const IqrSummary s = iqr_aggregate(runs);
  EXPECT_EQ(s.retained_seeds, kept);
  for (int t = 0; t < 20; ++t) {
    double lo = 1e300, hi = -1e300, sum = 0;
    for (int idx : kept) {
      const double v = runs[idx].episode_length[t];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    EXPECT_EQ(s.q25[t], lo);
    EXPECT_EQ(s.q75[t], hi);
    EXPECT_NEAR(s.mean[t], sum / 6, 1e-12);
    EXPECT_LE(s.q25[t], s.mean[t]);
    EXPECT_LE(s.mean[t], s.q75[t]);
  }
  // Hand-checked anchors for this fixture.
  EXPECT_EQ(final_window_metric(runs[0]), (50.0 + 3 + 50.0 + 4) / 2);
  EXPECT_NEAR(area_metric(runs[1]), 48.0 + 0.37 * 9.5 + 2.0, 1e-12);
}

TEST(Iqr, PermutationInvariant) {
  std::vector<RunRecord> runs = crossing_runs();
  const IqrSummary a = iqr_aggregate(runs);
  std::mt19937 rng(3);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(runs.begin(), runs.end(), rng);
    const IqrSummary b = iqr_aggregate(runs);
    EXPECT_EQ(a.q25, b.q25);
    EXPECT_EQ(a.q75, b.q75);
    EXPECT_EQ(a.retained_seeds, b.retained_seeds);
    for (std::size_t t = 0; t < a.mean.size(); ++t) EXPECT_NEAR(a.mean[t], b.mean[t], 1e-12);
  }
}

TEST(Iqr, PositiveScalingScalesBand) {
  const std::vector<RunRecord> runs = crossing_runs();
  std::vector<RunRecord> scaled = runs;
  for (RunRecord& r : scaled) {
    for (double& v : r.episode_length) v *= 2.5;
  }
  const IqrSummary a = iqr_aggregate(runs);
  const IqrSummary b = iqr_aggregate(scaled);
  EXPECT_EQ(a.retained_seeds, b.retained_seeds);
  for (std::size_t t = 0; t < a.mean.size(); ++t) {
    EXPECT_NEAR(b.q25[t], 2.5 * a.q25[t], 1e-12);
    EXPECT_NEAR(b.mean[t], 2.5 * a.mean[t], 1e-12);
    EXPECT_NEAR(b.q75[t], 2.5 * a.q75[t], 1e-12);
  }
}

TEST(Iqr, FailedRunsExcluded) {
  std::vector<RunRecord> runs = crossing_runs();
  runs[3].failed = true;
  runs[3].episode_length.clear();
  const IqrSummary s = iqr_aggregate(runs);
  EXPECT_EQ(s.excluded_failed, 1);
  EXPECT_EQ(s.retained_seeds.size(), 5u);  // 9 runs: drop 2 per end
  EXPECT_EQ(std::count(s.retained_seeds.begin(), s.retained_seeds.end(), 3), 0);
  for (RunRecord& r : runs) r.failed = true;
  EXPECT_THROW(iqr_aggregate(runs), RuntimeFault);
}

TEST(Rank, AscendingWithSeedTieBreak) {
  std::vector<RunRecord> runs = {constant_run(2, 5), constant_run(0, 5), constant_run(1, 1)};
  const auto ranked = rank_runs(runs);
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].seed_index, 1);
  EXPECT_EQ(ranked[1].seed_index, 0);
  EXPECT_EQ(ranked[2].seed_index, 2);
}

TEST(Grid, FullGridCells) {
  const ExperimentGrid g = default_full_grid();
  EXPECT_EQ(g.cells.size(), 32u);
  EXPECT_EQ(g.seeds, 10);
  std::set<std::string> ids;
  std::set<double> ranges;
  for (const GridCell& c : g.cells) {
    ids.insert(c.id());
    ranges.insert(c.range);
  }
  EXPECT_EQ(ids.size(), 32u);
  EXPECT_EQ(ranges, (std::set<double>{0.2, 0.5, 1.0, 2.0}));
  EXPECT_TRUE(ids.count("ray-proximity-min_beam-r1"));
  EXPECT_TRUE(ids.count("ray-binary-any_beam-r0.2"));
  EXPECT_TRUE(ids.count("field-localization-full-r2"));
  EXPECT_NO_THROW(g.validate());
}

TEST(Grid, ValidationRejectsBadGrids) {
  ExperimentGrid g = default_full_grid();
  g.seeds = 1;
  EXPECT_THROW(g.validate(), ConfigError);
  g = default_full_grid();
  g.cells.push_back(g.cells.front());
  EXPECT_THROW(g.validate(), ConfigError);
  g.cells.clear();
  EXPECT_THROW(g.validate(), ConfigError);
  EXPECT_THROW(grid_from_json(Json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(grid_from_json(Json{{"preset", "tiny"}}), ConfigError);
}

TEST(Grid, RunConfigAppliesCellAndSeed) {
  ExperimentGrid g = default_full_grid();
  g.base_seed = 40;
  const GridCell cell{SensorGeometry::kRayGrid, SignalFn::kBinary, BeamReduction::kAnyBeam, 0.5};
  const RunConfig rc = g.run_config(cell, 3);
  EXPECT_EQ(rc.seed, 43u);
  EXPECT_EQ(rc.sensors.geometry, SensorGeometry::kRayGrid);
  EXPECT_EQ(rc.sensors.reduction, BeamReduction::kAnyBeam);
  EXPECT_EQ(rc.sensors.range, 0.5);
  EXPECT_EQ(rc.iterations, g.iterations);
  EXPECT_EQ(rc.ppo.num_envs, g.num_envs);
}

TEST(Grid, JsonRoundTrip) {
  ExperimentGrid g = default_full_grid();
  g.seeds = 3;
  g.iterations = 17;
  g.base.env.speed.hi = 7.5;
  const ExperimentGrid back = grid_from_json(Json::parse(to_json(g).dump()));
  EXPECT_TRUE(same_grid(g, back));
  EXPECT_EQ(back.cells, g.cells);
  EXPECT_EQ(back.base.env, g.base.env);
}

TEST(Grid, ShippedFullGridMatchesPreset) {
  const ExperimentGrid g = load_grid(std::string(DODGE_CONFIG_DIR) + "/grid_full.json");
  EXPECT_TRUE(same_grid(g, default_full_grid()));
}

TEST(Manifest, HashTracksEveryConfigField) {
  const ExperimentGrid g = default_full_grid();
  const std::string h = make_manifest(g, {})["grid_hash"];
  EXPECT_EQ(make_manifest(default_full_grid(), {})["grid_hash"], h);
  std::vector<std::function<void(ExperimentGrid&)>> edits = {
      [](ExperimentGrid& x) { x.seeds = 11; },
      [](ExperimentGrid& x) { x.iterations = 301; },
      [](ExperimentGrid& x) { x.num_envs = 128; },
      [](ExperimentGrid& x) { x.base_seed = 2; },
      [](ExperimentGrid& x) { x.cells[5].range = 0.3; },
      [](ExperimentGrid& x) { x.base.env.ball_radius = 0.16; },
      [](ExperimentGrid& x) { x.base.env.throw_interval.lo = 1.1; },
      [](ExperimentGrid& x) { x.base.env.weights.drift = 0.4; },
      [](ExperimentGrid& x) { x.base.sensors.placement_seed = 8; },
      [](ExperimentGrid& x) { x.base.ppo.learning_rate = 1e-3; },
      [](ExperimentGrid& x) { x.base.robot.joints[4].kp = 61; },
      [](ExperimentGrid& x) { x.base.robot.tilt_gain = 2.0; },
  };
  for (std::size_t k = 0; k < edits.size(); ++k) {
    ExperimentGrid e = default_full_grid();
    edits[k](e);
    EXPECT_NE(make_manifest(e, {})["grid_hash"], h) << "edit " << k;
  }
}

ExperimentGrid tiny_grid() {
  ExperimentGrid g;
  g.cells = {{SensorGeometry::kField, SignalFn::kProximity, BeamReduction::kFull, 1.0},
             {SensorGeometry::kField, SignalFn::kBinary, BeamReduction::kFull, 0.5}};
  g.seeds = 3;
  g.iterations = 3;
  g.num_envs = 8;
  g.base.ppo.horizon = 8;
  g.base.ppo.minibatches = 2;
  g.base.ppo.epochs = 1;
  return g;
}

TEST(RunGrid, RecordsResumeAndExport) {
  const fs::path out = fresh_dir("dodge_grid_test");
  const ExperimentGrid g = tiny_grid();
  const auto records = run_grid(g, out.string(), false, 2);
  ASSERT_EQ(records.size(), 6u);
  std::vector<fs::path> files;
  for (const RunRecord& r : records) {
    EXPECT_FALSE(r.failed) << r.error;
    EXPECT_EQ(r.episode_length.size(), 3u);
    files.push_back(out / "records" / (r.cell_id + "__s" + std::to_string(r.seed_index) + ".json"));
    ASSERT_TRUE(fs::exists(files.back()));
  }
  std::vector<std::string> before;
  for (const fs::path& f : files) before.push_back(slurp(f));

  // Interrupted after four records: the last two are missing.
  fs::remove(files[4]);
  fs::remove(files[5]);
  int resumed = 0;
  const auto again = run_grid(g, out.string(), true, 1,
                              [&](const RunRecord&, bool was_resumed) { resumed += was_resumed; });
  EXPECT_EQ(resumed, 4);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(slurp(files[k]), before[k]);
  for (std::size_t k = 0; k < again.size(); ++k) {
    EXPECT_EQ(again[k].episode_length, records[k].episode_length);
    EXPECT_EQ(again[k].config_hash, records[k].config_hash);
  }

  // A changed config invalidates the stored record.
  ExperimentGrid changed = g;
  changed.base.ppo.learning_rate = 1e-3;
  resumed = 0;
  run_grid(changed, out.string(), true, 1,
           [&](const RunRecord&, bool was_resumed) { resumed += was_resumed; });
  EXPECT_EQ(resumed, 0);

  const auto summaries = summarize(g, again);
  ASSERT_EQ(summaries.size(), 2u);
  export_summaries(g, summaries, again, out.string());
  std::ifstream csv(out / "summaries" / "summary.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "cell,iteration,q25,mean,q75");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, g.iterations * static_cast<int>(g.cells.size()));
  EXPECT_TRUE(fs::exists(out / "summaries" / (g.cells[0].id() + ".csv")));
  const Json manifest = read_json_file((out / "manifest.json").string());
  EXPECT_EQ(manifest["runs"].size(), 6u);
  EXPECT_EQ(manifest["record_hashes"].size(), 6u);
  fs::remove_all(out);
}

TEST(RunGrid, FailedRunIsRecordedNotFatal) {
  ExperimentGrid g = tiny_grid();
  g.seeds = 2;
  g.base.env.weights.energy = 1e308;  // rewards overflow, the loss goes non-finite
  const auto records = run_grid(g, "", false, 1);
  ASSERT_EQ(records.size(), 4u);
  std::vector<std::string> warnings;
  for (const RunRecord& r : records) {
    EXPECT_TRUE(r.failed);
    EXPECT_FALSE(r.error.empty());
  }
  const auto summaries = summarize(g, records, [&](const std::string& w) { warnings.push_back(w); });
  EXPECT_TRUE(summaries.empty());
  EXPECT_EQ(warnings.size(), 6u);  // one per failed run plus one per empty cell
}

TEST(RunRecordJson, RoundTrip) {
  RunRecord r = constant_run(4, 12.5);
  r.failed = false;
  r.wall_time = 3.25;
  r.config_hash = "0123456789abcdef";
  const RunRecord back = record_from_json(Json::parse(to_json(r).dump()));
  EXPECT_EQ(back.cell_id, r.cell_id);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.episode_length, r.episode_length);
  EXPECT_EQ(back.reward, r.reward);
  EXPECT_EQ(back.config_hash, r.config_hash);
}

}  // namespace
}  // namespace dodge
