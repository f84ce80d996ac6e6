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
#include <functional>
#include <string>
#include <vector>

#include "dodge/config.hpp"
#include "dodge/sensors.hpp"

namespace dodge {

struct GridCell {
  SensorGeometry geometry = SensorGeometry::kField;
  SignalFn signal = SignalFn::kProximity;
  BeamReduction reduction = BeamReduction::kFull;
  double range = 1.0;

  // e.g. "field-proximity-full-r2"
  std::string id() const;
  bool operator==(const GridCell&) const = default;
};

struct ExperimentGrid {
  std::vector<GridCell> cells;
  int seeds = 10;
  std::uint64_t base_seed = 1;
  int iterations = 300;
  int num_envs = 256;
  RunConfig base;  // everything except the sensor signal settings

  void validate() const;
  // Run config for one cell and seed index.
  RunConfig run_config(const GridCell& cell, int seed_index) const;
  std::uint64_t seed_for(int seed_index) const {
    return base_seed + static_cast<std::uint64_t>(seed_index);
  }
};

// {ray, field} x {localization, proximity, binary} x {0.2, 0.5, 1, 2} m,
// plus reduced ray sensors (proximity/min_beam and binary/any_beam) at every
// range.
ExperimentGrid default_full_grid();

Json to_json(const ExperimentGrid& g);
ExperimentGrid grid_from_json(const Json& j);
ExperimentGrid load_grid(const std::string& path);
bool same_grid(const ExperimentGrid& a, const ExperimentGrid& b);

struct RunRecord {
  std::string cell_id;
  int seed_index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<double> episode_length;  // per iteration
  std::vector<double> reward;          // per iteration
  double wall_time = 0.0;              // seconds
  std::string config_hash;
};

Json to_json(const RunRecord& r);
RunRecord record_from_json(const Json& j);

using RunProgress = std::function<void(const RunRecord&, bool resumed)>;

// One training run per (cell, seed). Records are written to
// out_dir/records/ as each run finishes; with `resume`, runs that already
// have a record with a matching config hash are loaded instead of rerun.
std::vector<RunRecord> run_grid(const ExperimentGrid& grid,
                                const std::string& out_dir, bool resume,
                                int workers, const RunProgress& progress = {});

// Mean episode length over the last 10% of iterations (at least one).
double final_window_metric(const RunRecord& r);
// Mean episode length over all iterations.
double area_metric(const RunRecord& r);

// Successful runs ordered by ascending metric (ties by seed index).
std::vector<RunRecord> rank_runs(const std::vector<RunRecord>& records,
                                 const std::function<double(const RunRecord&)>& metric =
                                     final_window_metric);

struct IqrSummary {
  std::string cell_id;
  std::vector<double> q25;
  std::vector<double> mean;
  std::vector<double> q75;
  std::vector<int> retained_seeds;
  double retained_metric_mean = 0.0;
  int excluded_failed = 0;
};

// Drops floor(n/4) runs from each end of the ranking; the band is the
// per-iteration min/max of the retained runs and `mean` their average.
IqrSummary iqr_aggregate(const std::vector<RunRecord>& records);

// summaries/summary.csv (cell,iteration,q25,mean,q75), one
// summaries/<cell>.csv per cell, and manifest.json.
void export_summaries(const ExperimentGrid& grid,
                      const std::vector<IqrSummary>& summaries,
                      const std::vector<RunRecord>& records,
                      const std::string& out_dir);

Json make_manifest(const ExperimentGrid& grid,
                   const std::vector<RunRecord>& records);

// Aggregates records grouped by cell, in grid order; cells without a
// successful run are reported through `warn` and skipped.
std::vector<IqrSummary> summarize(
    const ExperimentGrid& grid, const std::vector<RunRecord>& records,
    const std::function<void(const std::string&)>& warn = {});

}  // namespace dodge
