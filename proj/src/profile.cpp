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

#include "arscale/profile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace arscale {
namespace {

bool weights_sum_to_one(double a, double b) { return std::abs(a + b - 1.0) <= 1e-9; }

bool rate_ok(double r) { return r > 0.0 && r <= 1.0; }

double clamp_unit(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void ProfileConfig::validate() const {
  if (!weights_sum_to_one(alpha_h, alpha_m) || alpha_h < 0.0 || alpha_m < 0.0) {
    throw std::invalid_argument("ProfileConfig: alpha_h + alpha_m must be 1");
  }
  if (!weights_sum_to_one(w_tok, w_blk) || w_tok < 0.0 || w_blk < 0.0) {
    throw std::invalid_argument("ProfileConfig: w_tok + w_blk must be 1");
  }
  if (!weights_sum_to_one(w_i, w_d) || w_i < 0.0 || w_d < 0.0) {
    throw std::invalid_argument("ProfileConfig: w_i + w_d must be 1");
  }
  if (!rate_ok(lambda_tok) || !rate_ok(lambda_i) || !rate_ok(lambda_d)) {
    throw std::invalid_argument("ProfileConfig: EMA rates must be in (0,1]");
  }
  if (block_size < 1) {
    throw std::invalid_argument("ProfileConfig: block_size must be >= 1");
  }
  if (rho_min_is_count) {
    if (rho_min < 1.0) {
      throw std::invalid_argument("ProfileConfig: rho_min count must be >= 1");
    }
  } else if (!(rho_min > 0.0 && rho_min <= 1.0)) {
    throw std::invalid_argument("ProfileConfig: rho_min must be in (0,1]");
  }
  if (!(q_worst > 0.0 && q_worst <= 1.0)) {
    throw std::invalid_argument("ProfileConfig: q_worst must be in (0,1]");
  }
  if (minmax_window < 2 || zscore_window < 2) {
    throw std::invalid_argument("ProfileConfig: windows must be >= 2");
  }
  if (!(z_max > 0.0)) {
    throw std::invalid_argument("ProfileConfig: z_max must be positive");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("ProfileConfig: epsilon must be positive");
  }
}

IntrinsicState::IntrinsicState(int grid_h, int grid_w, const ProfileConfig& cfg)
    : grid_h_(grid_h),
      grid_w_(grid_w),
      block_size_(cfg.block_size),
      minmax_buf_(cfg.minmax_window) {
  if (grid_h < 1 || grid_w < 1) {
    throw std::invalid_argument("IntrinsicState: grid must be nonempty");
  }
  blocks_x_ = (grid_w_ + block_size_ - 1) / block_size_;
  blocks_y_ = (grid_h_ + block_size_ - 1) / block_size_;
  grid_ = Eigen::ArrayXXd::Zero(grid_h_, grid_w_);
  filled_ = Eigen::ArrayXX<bool>::Constant(grid_h_, grid_w_, false);
  block_sum_.assign(static_cast<std::size_t>(blocks_x_ * blocks_y_), 0.0);
  block_count_.assign(static_cast<std::size_t>(blocks_x_ * blocks_y_), 0);
}

bool IntrinsicState::filled(GridPos pos) const {
  return filled_(pos.row, pos.col);
}

double IntrinsicState::grid_value(GridPos pos) const {
  return grid_(pos.row, pos.col);
}

int IntrinsicState::block_index(GridPos pos) const {
  return (pos.row / block_size_) * blocks_x_ + pos.col / block_size_;
}

int IntrinsicState::block_cell_count(int block) const {
  const int by = block / blocks_x_;
  const int bx = block % blocks_x_;
  const int rows = std::min(block_size_, grid_h_ - by * block_size_);
  const int cols = std::min(block_size_, grid_w_ - bx * block_size_);
  return rows * cols;
}

double token_confidence_from_signals(double h_norm, double margin,
                                     const ProfileConfig& cfg) {
  const double u = cfg.alpha_h * h_norm + cfg.alpha_m * (1.0 - margin);
  return clamp_unit(1.0 - u);
}

double token_confidence(const ProbVector& p, const ProfileConfig& cfg) {
  cfg.validate();
  return token_confidence_from_signals(normalized_entropy(p), top2_margin(p),
                                       cfg);
}

double update_ema(double prev, double sample, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("update_ema: rate must be in (0,1]");
  }
  return (1.0 - rate) * prev + rate * sample;
}

double record_and_worst_block(IntrinsicState& state, GridPos pos,
                              double h_norm, const ProfileConfig& cfg) {
  if (pos.row < 0 || pos.row >= state.grid_h_ || pos.col < 0 ||
      pos.col >= state.grid_w_) {
    throw std::invalid_argument("record_and_worst_block: position out of bounds");
  }
  if (state.filled_(pos.row, pos.col)) {
    throw std::invalid_argument("record_and_worst_block: cell already filled");
  }
  if (h_norm < -1e-6 || h_norm > 1.0 + 1e-6) {
    throw std::invalid_argument("record_and_worst_block: h_norm outside [0,1]");
  }
  h_norm = clamp_unit(h_norm);

  state.grid_(pos.row, pos.col) = h_norm;
  state.filled_(pos.row, pos.col) = true;
  const auto block = static_cast<std::size_t>(state.block_index(pos));
  state.block_sum_[block] += h_norm;
  state.block_count_[block] += 1;
  state.total_sum_ += h_norm;
  state.total_count_ += 1;

  // Eligible blocks and their mean filled entropy.
  std::vector<std::pair<double, int>> means;  // (mean, block) for ordering
  const int n_blocks = state.blocks_x_ * state.blocks_y_;
  for (int b = 0; b < n_blocks; ++b) {
    const auto count = state.block_count_[static_cast<std::size_t>(b)];
    if (count == 0) continue;
    const bool eligible =
        cfg.rho_min_is_count
            ? static_cast<double>(count) >= cfg.rho_min
            : static_cast<double>(count) >=
                  cfg.rho_min * state.block_cell_count(b);
    if (!eligible) continue;
    means.emplace_back(
        state.block_sum_[static_cast<std::size_t>(b)] / static_cast<double>(count),
        b);
  }
  if (means.empty()) {
    return state.total_sum_ / static_cast<double>(state.total_count_);
  }

  // Worst ceil(q * n) blocks, highest mean first; ties broken by block
  // index so selection is deterministic.
  std::sort(means.begin(), means.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  auto take = static_cast<std::size_t>(
      std::ceil(cfg.q_worst * static_cast<double>(means.size())));
  take = std::clamp<std::size_t>(take, 1, means.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < take; ++i) acc += means[i].first;
  return acc / static_cast<double>(take);
}

double block_stability(IntrinsicState& state, double e_worst,
                       const ProfileConfig& cfg) {
  (void)cfg;
  state.minmax_buf_.push(e_worst);
  const double lo = state.minmax_buf_.min();
  const double hi = state.minmax_buf_.max();
  const double n_mm = (hi == lo) ? 0.5 : (e_worst - lo) / (hi - lo);
  return 1.0 - n_mm;
}

double intrinsic_score(IntrinsicState& state, double s_tok, double b_stability,
                       const ProfileConfig& cfg) {
  state.ema_tok_ = state.ema_tok_
                       ? update_ema(*state.ema_tok_, s_tok, cfg.lambda_tok)
                       : s_tok;
  const double i_raw = cfg.w_tok * *state.ema_tok_ + cfg.w_blk * b_stability;
  state.ema_i_ =
      state.ema_i_ ? update_ema(*state.ema_i_, i_raw, cfg.lambda_i) : i_raw;
  return *state.ema_i_;
}

double conditional_utilization(ConditionalState& state, double k_t,
                               const ProfileConfig& cfg) {
  if (k_t < 0.0) {
    throw std::invalid_argument("conditional_utilization: K_t must be >= 0");
  }
  state.kl_window_.push(k_t);
  const double mu = state.kl_window_.mean();
  const double sigma = state.kl_window_.stddev();
  const double z = (k_t - mu) / (sigma + cfg.epsilon);
  const double clipped = std::clamp(z, -cfg.z_max, cfg.z_max);
  return 0.5 + 0.5 * clipped / cfg.z_max;
}

double ConditionalState::smooth(double d_raw, const ProfileConfig& cfg) {
  ema_d_ = ema_d_ ? update_ema(*ema_d_, d_raw, cfg.lambda_d) : d_raw;
  return *ema_d_;
}

namespace {

double calibrate(double c, const ProfileConfig& cfg) {
  switch (cfg.calibration) {
    case CalibrationKind::kNone:
      return c;
    case CalibrationKind::kAffineSigmoid:
      return 1.0 / (1.0 + std::exp(-cfg.calibration_a * (c - cfg.calibration_c)));
  }
  return c;
}

}  // namespace

UnifiedConfidence unified_confidence(ConfidenceState& state, double i_t,
                                     double d_hat, const ProfileConfig& cfg) {
  const double c = calibrate(cfg.w_i * i_t + cfg.w_d * d_hat, cfg);
  state.running_min_ =
      state.running_min_ ? std::min(*state.running_min_, c) : c;
  const double c_min = *state.running_min_;
  const double rebound = (c - c_min) / (std::abs(c_min) + cfg.epsilon);
  state.confidence_ = c;
  state.rebound_ = rebound;
  return {c, c_min, rebound};
}

ProfileStepResult profile_step(ConfidenceState& state, const ProbVector& cond,
                               const ProbVector& uncond, GridPos pos,
                               const ProfileConfig& cfg) {
  ProfileStepResult r;
  r.h_norm = normalized_entropy(cond);
  r.margin = top2_margin(cond);
  r.s_tok = token_confidence_from_signals(r.h_norm, r.margin, cfg);
  r.e_worst = record_and_worst_block(state.intrinsic_, pos, r.h_norm, cfg);
  r.b_stability = block_stability(state.intrinsic_, r.e_worst, cfg);
  r.intrinsic = intrinsic_score(state.intrinsic_, r.s_tok, r.b_stability, cfg);
  r.s_tok_ema = *state.intrinsic_.ema_tok();
  r.kl = kl_divergence(cond, uncond);
  r.d_raw = conditional_utilization(state.conditional_, r.kl, cfg);
  r.d_hat = state.conditional_.smooth(r.d_raw, cfg);
  const UnifiedConfidence u = unified_confidence(state, r.intrinsic, r.d_hat, cfg);
  r.confidence = u.confidence;
  r.running_min = u.running_min;
  r.rebound = u.rebound;
  state.step_ += 1;
  state.history_.push_back({r.intrinsic, r.d_hat, r.confidence, r.rebound});
  return r;
}

}  // namespace arscale
