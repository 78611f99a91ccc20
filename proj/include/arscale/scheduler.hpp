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

#include <cstddef>

#include "arscale/rolling.hpp"

namespace arscale {

// Guidance scheduler. Raw scale per step:
//   s_raw = s_base + alpha * (1 - D_hat) + beta * Var_recent(I) - gamma * R
// then EMA-smoothed against the previous emission, clamped to
// [s_min, s_max], and held unchanged when the candidate moves by less
// than the deadband width.

struct SchedulerConfig {
  double s_base = 4.0;
  double alpha = 0.3;   // weight of under-conditioning (1 - D_hat)
  double beta = 0.4;    // weight of intrinsic volatility Var_recent(I)
  double gamma = 0.4;   // weight of the rebound relief term
  double lambda_cfg = 0.2;  // EMA rate toward the raw scale
  double s_min = 1.0;
  double s_max = 8.0;
  double epsilon_s = 0.02;  // deadband width
  std::size_t var_window = 16;

  void validate() const;
};

/// Per-trajectory scheduler state: last emitted scale plus the window of
/// recent intrinsic scores feeding the volatility term.
class SchedulerState {
 public:
  explicit SchedulerState(const SchedulerConfig& cfg)
      : s_prev_(cfg.s_base), i_window_(cfg.var_window) {}

  double previous_scale() const { return s_prev_; }
  RollingWindow& i_window() { return i_window_; }
  const RollingWindow& i_window() const { return i_window_; }

  friend double schedule_cfg(SchedulerState& state, double s_raw,
                             const SchedulerConfig& cfg);

 private:
  double s_prev_;
  RollingWindow i_window_;
};

/// Population variance over the buffered intrinsic scores; empty -> 0.
double recent_variance(const RollingWindow& buf);

/// s_base + alpha * (1 - d_hat) + beta * var_i - gamma * rebound.
double raw_cfg_scale(double d_hat, double var_i, double rebound,
                     const SchedulerConfig& cfg);

/// candidate = clamp((1 - lambda) * s_prev + lambda * s_raw, s_min, s_max);
/// emits s_prev unchanged when |candidate - s_prev| < epsilon_s.
double schedule_cfg(SchedulerState& state, double s_raw,
                    const SchedulerConfig& cfg);

}  // namespace arscale
