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
#include <span>
#include <vector>

#include "arscale/dist.hpp"
#include "arscale/gate.hpp"
#include "arscale/profile.hpp"
#include "arscale/scheduler.hpp"

namespace arscale {

// Lockstep trajectory engine.
//
// Spawns k_target + m_buf trajectories and advances them one step at a
// time: every active trajectory reports exactly one observation for the
// common step index, the profile updates, the gate decides, terminations
// apply, and the scheduler emits each survivor's guidance scale for the
// *next* step. The batch-shared gate threshold initializes at warm-up
// end and refreshes every update_interval steps after that.
//
// The engine's outputs are a pure function of (config, observation
// stream); replaying an identical stream reproduces every decision and
// trace value bit for bit.

using TrajectoryId = std::int32_t;

struct EngineConfig {
  std::int32_t k_target = 4;
  std::int32_t m_buf = 4;
  std::int64_t total_steps = 256;  // T = grid_h * grid_w
  int grid_h = 16;
  int grid_w = 16;
  std::int64_t vocab_size = 512;
  std::uint64_t seed = 1;
  bool gate_enabled = true;       // false: pure profiling, no pruning
  bool scheduler_enabled = true;  // false: every emission is s_base
  ProfileConfig profile;
  GateConfig gate;
  SchedulerConfig scheduler;

  std::int32_t batch_size() const { return k_target + m_buf; }
  void validate() const;
};

/// One decode step reported by a trajectory's observation source.
struct StepObservation {
  TrajectoryId trajectory = 0;
  std::int64_t step = 0;  // 1-based
  ProbVector cond;
  ProbVector uncond;
  GridPos pos;
  std::int64_t token = 0;  // sampled index (recorded, not interpreted)
};

/// Seam for driving the engine: anything that can produce the next
/// observation under a given guidance scale (synthetic streams here;
/// real-model adapters later).
class ObservationSource {
 public:
  virtual ~ObservationSource() = default;
  virtual StepObservation next(double cfg_scale) = 0;
};

enum class TrajectoryStatus { kActive, kTerminated, kCompleted };

/// Everything recorded for one (trajectory, step).
struct StepTrace {
  std::int64_t step = 0;
  GridPos pos;
  ProfileStepResult profile;
  std::optional<double> threshold;  // theta used for this step's decision
  GateDecision decision;
  double cfg_scale = 0.0;  // scale emitted for the next step
};

struct TrajectoryRecord {
  TrajectoryId id = 0;
  TrajectoryStatus status = TrajectoryStatus::kActive;
  std::optional<TerminationReason> termination_reason;
  std::optional<std::int64_t> termination_step;
  std::int64_t tokens_consumed = 0;
  std::optional<double> final_confidence;  // C at completion only
  std::vector<StepTrace> trace;

  double mean_confidence() const;
};

struct StepOutcome {
  TrajectoryId id = 0;
  GateDecision decision;
  double cfg_scale = 0.0;  // to use for this trajectory's next step
};

struct TokenAccounting {
  std::int64_t total_tokens = 0;
  double saved_fraction = 0.0;  // 1 - total / ((k_target + m_buf) * T)
};

class TrajectoryEngine {
 public:
  explicit TrajectoryEngine(EngineConfig cfg);

  const EngineConfig& config() const { return cfg_; }

  /// Next step index the engine expects (1-based).
  std::int64_t current_step() const { return next_step_; }
  std::vector<TrajectoryId> active_ids() const;
  std::size_t active_count() const;
  bool finished() const;

  /// Advances the batch one step. Requires exactly one observation per
  /// active trajectory at the current step index, raster-consistent
  /// positions, and vocab-sized distributions; anything else rejects the
  /// whole batch step. Outcomes are ordered by ascending trajectory id.
  std::vector<StepOutcome> step(std::span<const StepObservation> observations);

  /// Completed trajectory with maximal final confidence; ties fall to
  /// higher mean confidence, then to the lowest id. nullopt when nothing
  /// completed.
  std::optional<TrajectoryId> select_winner() const;

  TokenAccounting token_accounting() const;

  const TrajectoryRecord& record(TrajectoryId id) const;
  const std::vector<TrajectoryRecord>& records() const { return records_; }
  std::optional<double> threshold() const { return gate_state_.theta_down; }
  std::int64_t warmup_steps() const { return warmup_steps_; }

 private:
  EngineConfig cfg_;
  std::int64_t next_step_ = 1;
  std::int64_t warmup_steps_ = 0;

  GateState gate_state_;
  std::vector<ConfidenceState> confidence_;
  std::vector<GateTrajState> gate_traj_;
  std::vector<SchedulerState> scheduler_;
  std::vector<TrajectoryRecord> records_;
};

}  // namespace arscale
