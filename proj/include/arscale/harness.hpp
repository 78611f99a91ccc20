// Copyright 2026 the arscale authors
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
#include <optional>
#include <string>
#include <vector>

#include "arscale/config.hpp"
#include "arscale/engine.hpp"

namespace arscale {

// Experiment harness: drives a synthetic cohort through the engine in
// lockstep, feeding each scheduler emission back into that trajectory's
// next observation, then aggregates metrics and writes trace/metrics
// files. Runs are pure functions of the configuration; repeated
// invocations produce byte-identical outputs.

struct TrajectoryOutcome {
  TrajectoryId id = 0;
  TrajectoryLabel label = TrajectoryLabel::kGood;
  ScenarioKind scenario = ScenarioKind::kStable;
  TrajectoryStatus status = TrajectoryStatus::kActive;
  std::optional<TerminationReason> reason;
  std::int64_t tokens = 0;
  std::optional<double> final_confidence;
  double mean_confidence = 0.0;
  double min_confidence = 0.0;
  double mean_scale = 0.0;
};

/// Histogram of every recorded per-step confidence value.
struct ConfidenceHistogram {
  static constexpr int kBins = 20;  // uniform over [0, 1]
  std::vector<std::int64_t> counts = std::vector<std::int64_t>(kBins, 0);
  std::int64_t total() const;
};

struct Metrics {
  std::string run_id;
  RunMode mode = RunMode::kScalingAr;
  std::vector<TrajectoryOutcome> outcomes;

  double pruning_precision = 1.0;  // terminated&doomed / terminated
  double pruning_recall = 1.0;     // terminated&doomed / doomed
  bool precision_degenerate = false;  // no terminations at all
  bool recall_degenerate = false;     // no doomed trajectories
  std::int64_t total_tokens = 0;
  double token_savings = 0.0;
  std::optional<TrajectoryId> winner;
  std::optional<TrajectoryLabel> winner_label;

  // Pooled mean emitted scale per run phase (warm-up window, thirds).
  double mean_scale_warmup = 0.0;
  double mean_scale_early = 0.0;
  double mean_scale_mid = 0.0;
  double mean_scale_late = 0.0;

  ConfidenceHistogram histogram;
};

struct RunResult {
  Metrics metrics;
  // Per-trajectory full records (trace series) for in-process callers.
  std::vector<TrajectoryRecord> records;
  std::vector<std::string> files_written;
};

/// Executes one configured run. When cfg.out_dir is nonempty, writes
/// trace.log (per trace_level), metrics.csv, and
/// confidence_histogram.csv there. Throws ConfigError for configuration
/// problems and std::runtime_error for IO failures.
RunResult run(const RunConfig& cfg);

/// Metrics as CSV rows: one header, one row per trajectory, one summary
/// row. Numbers carry 6 significant digits.
std::vector<std::string> emit_metrics(const Metrics& metrics);

/// Metrics recomputed from trace text (the trace is the source of
/// truth; used to validate that the metrics file adds nothing).
Metrics recompute_metrics_from_trace(const std::string& trace_text);

}  // namespace arscale
