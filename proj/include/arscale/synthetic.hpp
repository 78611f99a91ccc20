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
#include <random>
#include <vector>

#include "arscale/engine.hpp"

namespace arscale {

// Deterministic synthetic trajectory streams.
//
// Healthy steps emit a sharp conditional distribution (a dominant mode
// over a uniform tail, mix weight solved so the normalized entropy hits
// a target) against a flatter unconditional variant, keeping KL in a
// steady band. Two failure modes overlay this base:
//   - instability pocket: inside a step window and an affected block
//     set, the conditional entropy is raised to a configured level;
//   - semantic fade: the conditional mixes toward the unconditional
//     with non-decreasing weight, driving KL toward zero.
// The driving guidance scale sharpens the conditional via a power
// transform (temperature s_base_ref / scale), so the scheduler's output
// has a measurable effect on the stream.

enum class ScenarioKind { kStable, kInstabilityPocket, kSemanticFade };
enum class TrajectoryLabel { kGood, kDoomed };

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kStable;
  TrajectoryLabel label = TrajectoryLabel::kGood;

  std::int64_t vocab_size = 512;
  int grid_h = 16;
  int grid_w = 16;

  // Healthy phase: sharper for larger concentration. The conditional
  // normalized-entropy target is 1 / (1 + concentration), jittered
  // per step by +-entropy_jitter; the unconditional target sits
  // uncond_gap above it.
  double concentration = 4.0;
  double entropy_jitter = 0.1;
  double uncond_gap = 0.3;

  // Instability pocket (steps [onset, onset + duration)).
  std::int64_t onset = 0;
  std::int64_t duration = 0;
  double entropy_level = 1.0;
  std::vector<int> affected_blocks;  // empty = every block
  int block_size = 4;                // block indexing for affected_blocks

  // Semantic fade: mix weight min(1, fade_rate * steps_since_start).
  std::int64_t fade_start = 0;
  double fade_rate = 0.1;

  std::uint64_t seed = 0;
  double s_base_ref = 4.0;  // scale at which the power transform is 1

  std::int64_t total_steps() const {
    return static_cast<std::int64_t>(grid_h) * grid_w;
  }
  void validate() const;
};

/// Dominant mode at `dominant` over a uniform tail, with the mix solved
/// by bisection so normalized_entropy(result) == target within ~1e-12.
ProbVector peaked_distribution(std::int64_t vocab_size, double target_h_norm,
                               std::int64_t dominant);

class SyntheticSource final : public ObservationSource {
 public:
  SyntheticSource(TrajectoryId id, ScenarioSpec spec);

  StepObservation next(double cfg_scale) override;

  TrajectoryId id() const { return id_; }
  const ScenarioSpec& spec() const { return spec_; }
  std::int64_t current_step() const { return step_; }

 private:
  double uniform01();
  bool pocket_hits(std::int64_t t, GridPos pos) const;

  TrajectoryId id_;
  ScenarioSpec spec_;
  std::mt19937_64 rng_;
  std::int64_t step_ = 0;  // last emitted step
};

/// One deterministic source per spec, ids 0..n-1 in order. All specs
/// must agree on vocabulary and grid shape.
std::vector<SyntheticSource> make_cohort(const std::vector<ScenarioSpec>& specs);

}  // namespace arscale
