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

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

#include "arscale/dist.hpp"
#include "arscale/rolling.hpp"

namespace arscale {

// Dual-channel confidence profile.
//
// Per decode step, a trajectory's confidence state fuses two channels:
//   - intrinsic: token-level confidence (entropy + top-2 margin) smoothed
//     by EMA, and worst-block spatial stability from a rolling min-max of
//     the highest-entropy block means;
//   - conditional: KL(cond || uncond) passed through a rolling z-score,
//     clipped, mapped to [0, 1], and EMA-smoothed.
// The channels blend into a unified confidence C with a running minimum
// and a relative rebound, which downstream policies consume.

/// Position in the h x w token grid (row-major raster decode order).
struct GridPos {
  int row = 0;
  int col = 0;
};

/// Optional monotone recalibration of the unified confidence.
enum class CalibrationKind { kNone, kAffineSigmoid };

struct ProfileConfig {
  // Token confidence u = alpha_h * Hnorm + alpha_m * (1 - margin).
  double alpha_h = 0.5;
  double alpha_m = 0.5;
  double lambda_tok = 0.2;  // EMA rate for smoothed token confidence

  // Worst-block stability.
  int block_size = 4;
  double rho_min = 0.5;          // minimum fill before a block is eligible
  bool rho_min_is_count = false; // interpret rho_min as filled-cell count
  double q_worst = 0.1;          // worst fraction of eligible blocks
  std::size_t minmax_window = 64;

  // Intrinsic channel blend and smoothing.
  double w_tok = 0.65;
  double w_blk = 0.35;
  double lambda_i = 0.2;

  // Conditional channel (z-scored KL utilization).
  double z_max = 3.0;
  std::size_t zscore_window = 64;
  double lambda_d = 0.2;

  // Unified confidence.
  double w_i = 0.75;
  double w_d = 0.25;
  CalibrationKind calibration = CalibrationKind::kNone;
  double calibration_a = 1.0;  // steepness of sigmoid(a * (C - c))
  double calibration_c = 0.5;  // center of the affine-sigmoid
  double epsilon = 1e-8;       // guards the z-score and rebound denominators

  /// Throws std::invalid_argument when any invariant is violated
  /// (weight pairs must sum to 1 within 1e-9, rates in (0,1], ...).
  void validate() const;
};

/// Streaming state of the intrinsic channel for one trajectory.
class IntrinsicState {
 public:
  IntrinsicState(int grid_h, int grid_w, const ProfileConfig& cfg);

  int grid_h() const { return grid_h_; }
  int grid_w() const { return grid_w_; }
  bool filled(GridPos pos) const;
  double grid_value(GridPos pos) const;
  std::int64_t filled_count() const { return total_count_; }

  std::optional<double> ema_tok() const { return ema_tok_; }
  std::optional<double> ema_i() const { return ema_i_; }
  const RollingWindow& minmax_window() const { return minmax_buf_; }

  friend double record_and_worst_block(IntrinsicState& state, GridPos pos,
                                       double h_norm,
                                       const ProfileConfig& cfg);
  friend double block_stability(IntrinsicState& state, double e_worst,
                                const ProfileConfig& cfg);
  friend double intrinsic_score(IntrinsicState& state, double s_tok,
                                double b_stability, const ProfileConfig& cfg);

 private:
  int block_index(GridPos pos) const;
  int block_cell_count(int block) const;

  int grid_h_;
  int grid_w_;
  int block_size_;
  int blocks_x_;  // blocks per grid row
  int blocks_y_;

  Eigen::ArrayXXd grid_;                // latest normalized entropies
  Eigen::ArrayXX<bool> filled_;
  std::vector<double> block_sum_;       // per-block sum of filled entries
  std::vector<std::int64_t> block_count_;
  double total_sum_ = 0.0;
  std::int64_t total_count_ = 0;

  RollingWindow minmax_buf_;            // recent E_worst values
  std::optional<double> ema_tok_;       // smoothed token confidence
  std::optional<double> ema_i_;         // smoothed intrinsic score
};

/// Streaming state of the conditional channel for one trajectory.
class ConditionalState {
 public:
  explicit ConditionalState(const ProfileConfig& cfg)
      : kl_window_(cfg.zscore_window) {}

  const RollingWindow& kl_window() const { return kl_window_; }
  std::optional<double> ema_d() const { return ema_d_; }

  /// Updates the smoothed utilization with a fresh raw D_t.
  double smooth(double d_raw, const ProfileConfig& cfg);

  friend double conditional_utilization(ConditionalState& state, double k_t,
                                        const ProfileConfig& cfg);

 private:
  RollingWindow kl_window_;
  std::optional<double> ema_d_;
};

/// One step of the per-trajectory history series.
struct ProfilePoint {
  double intrinsic = 0.0;    // I_t
  double utilization = 0.0;  // smoothed D
  double confidence = 0.0;   // C_t
  double rebound = 0.0;      // R_t
};

struct UnifiedConfidence {
  double confidence = 0.0;      // C_t (after optional calibration)
  double running_min = 0.0;     // min over all steps so far
  double rebound = 0.0;         // (C_t - C_min) / (|C_min| + epsilon)
};

/// Full per-trajectory confidence state. Owned by exactly one trajectory
/// and updated strictly in step order; self-contained, movable.
class ConfidenceState {
 public:
  ConfidenceState(int grid_h, int grid_w, const ProfileConfig& cfg)
      : intrinsic_(grid_h, grid_w, cfg), conditional_(cfg) {}

  IntrinsicState& intrinsic() { return intrinsic_; }
  const IntrinsicState& intrinsic() const { return intrinsic_; }
  ConditionalState& conditional() { return conditional_; }
  const ConditionalState& conditional() const { return conditional_; }

  std::int64_t step() const { return step_; }
  double confidence() const { return confidence_; }
  std::optional<double> running_min() const { return running_min_; }
  double rebound() const { return rebound_; }
  const std::vector<ProfilePoint>& history() const { return history_; }

  friend UnifiedConfidence unified_confidence(ConfidenceState& state,
                                              double i_t, double d_hat,
                                              const ProfileConfig& cfg);
  friend struct ProfileStepResult profile_step(ConfidenceState& state,
                                               const ProbVector& cond,
                                               const ProbVector& uncond,
                                               GridPos pos,
                                               const ProfileConfig& cfg);

 private:
  IntrinsicState intrinsic_;
  ConditionalState conditional_;
  std::int64_t step_ = 0;
  double confidence_ = 0.0;
  std::optional<double> running_min_;
  double rebound_ = 0.0;
  std::vector<ProfilePoint> history_;
};

/// Everything one decode step produced, in pipeline order.
struct ProfileStepResult {
  double h_norm = 0.0;       // normalized entropy of the conditional dist
  double margin = 0.0;       // top-1/top-2 margin
  double s_tok = 0.0;        // raw token confidence
  double s_tok_ema = 0.0;    // EMA-smoothed token confidence
  double e_worst = 0.0;      // mean entropy of the worst blocks
  double b_stability = 0.0;  // 1 - rolling min-max of e_worst
  double intrinsic = 0.0;    // I_t
  double kl = 0.0;           // K_t = KL(cond || uncond)
  double d_raw = 0.0;        // D_t before smoothing
  double d_hat = 0.0;        // smoothed utilization
  double confidence = 0.0;   // C_t
  double running_min = 0.0;  // C_min
  double rebound = 0.0;      // R_t
};

/// u = alpha_h * Hnorm(p) + alpha_m * (1 - margin(p)); returns 1 - u.
/// One-hot -> 1, uniform -> 0.
double token_confidence(const ProbVector& p, const ProfileConfig& cfg);

/// Same statistic from precomputed signals (avoids recomputing entropy).
double token_confidence_from_signals(double h_norm, double margin,
                                     const ProfileConfig& cfg);

/// (1 - rate) * prev + rate * sample; rate must be in (0, 1].
double update_ema(double prev, double sample, double rate);

/// Writes h_norm at pos (each cell exactly once, raster order), then
/// returns the mean entropy over the worst ceil(q * #eligible) eligible
/// blocks. A block is eligible once its fill ratio reaches rho_min (or
/// its filled count reaches rho_min in count mode). With no eligible
/// block yet, falls back to the mean of all filled entries.
double record_and_worst_block(IntrinsicState& state, GridPos pos,
                              double h_norm, const ProfileConfig& cfg);

/// Pushes e_worst into the rolling min-max window and returns
/// B = 1 - (e_worst - min) / (max - min); 0.5 when the window is flat.
double block_stability(IntrinsicState& state, double e_worst,
                       const ProfileConfig& cfg);

/// Updates the token-confidence EMA with s_tok, blends with b_stability,
/// and returns the EMA-smoothed intrinsic score I_t.
double intrinsic_score(IntrinsicState& state, double s_tok,
                       double b_stability, const ProfileConfig& cfg);

/// Pushes K_t into the rolling window and maps its z-score into [0, 1]:
/// D = 0.5 + 0.5 * clip(z, -z_max, z_max) / z_max.
double conditional_utilization(ConditionalState& state, double k_t,
                               const ProfileConfig& cfg);

/// C = w_i * I + w_d * D_hat (optionally calibrated), running minimum,
/// and relative rebound.
UnifiedConfidence unified_confidence(ConfidenceState& state, double i_t,
                                     double d_hat, const ProfileConfig& cfg);

/// Runs the full per-step pipeline over one observation's distributions.
/// The intrinsic channel reads the conditional distribution (the
/// prompt-conditioned predictive distribution); the conditional channel
/// reads KL(cond || uncond).
ProfileStepResult profile_step(ConfidenceState& state, const ProbVector& cond,
                               const ProbVector& uncond, GridPos pos,
                               const ProfileConfig& cfg);

}  // namespace arscale
