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

#include "arscale/gate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arscale {

void GateConfig::validate() const {
  if (!(quantile > 0.0 && quantile < 1.0)) {
    throw std::invalid_argument("GateConfig: quantile must be in (0,1)");
  }
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0) ||
      !(t_min_frac >= 0.0 && t_min_frac < 1.0)) {
    throw std::invalid_argument("GateConfig: fractions must be in [0,1)");
  }
  if (!(lambda_theta > 0.0 && lambda_theta <= 1.0)) {
    throw std::invalid_argument("GateConfig: lambda_theta must be in (0,1]");
  }
  if (update_interval < 1 || recovery_window < 1) {
    throw std::invalid_argument("GateConfig: intervals must be >= 1");
  }
  if (std::isnan(delta_rec) || std::isnan(r_thr) || std::isnan(c_hard)) {
    throw std::invalid_argument("GateConfig: thresholds must not be NaN");
  }
}

namespace {

double nearest_rank_quantile(std::span<const double> values, double p) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto rank = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

}  // namespace

std::optional<double> init_threshold(std::span<const double> warmup_values,
                                     double p) {
  if (warmup_values.empty()) return std::nullopt;
  return nearest_rank_quantile(warmup_values, p);
}

double update_threshold(double theta, std::span<const double> recent, double p,
                        double lambda_theta) {
  if (recent.empty()) return theta;
  const double q = nearest_rank_quantile(recent, p);
  return (1.0 - lambda_theta) * theta + lambda_theta * q;
}

bool check_recovery(GateTrajState& state, double confidence,
                    double running_min, double rebound, const GateConfig& cfg,
                    std::int64_t t) {
  const bool absolute = confidence >= running_min + cfg.delta_rec;
  const bool relative = rebound >= cfg.r_thr;
  if (absolute || relative) {
    state.last_recovery_step = t;
  }
  return state.last_recovery_step &&
         t - *state.last_recovery_step < cfg.recovery_window;
}

std::int64_t protection_horizon(const GateConfig& cfg,
                                std::int64_t total_steps) {
  return static_cast<std::int64_t>(
      std::ceil(cfg.t_min_frac * static_cast<double>(total_steps)));
}

GateDecision gate_decision(const GateTrajState& state,
                           const std::optional<double>& theta,
                           double confidence, double running_min,
                           std::int64_t t, std::int64_t total_steps,
                           const GateConfig& cfg) {
  if (confidence < cfg.c_hard) {
    return GateDecision::Terminate(TerminationReason::kHardFail);
  }
  if (t < protection_horizon(cfg, total_steps) || !theta) {
    return GateDecision::Continue();
  }
  const bool recovered =
      state.last_recovery_step &&
      t - *state.last_recovery_step < cfg.recovery_window;
  if (running_min < *theta && !recovered) {
    return GateDecision::Terminate(TerminationReason::kLowConfidence);
  }
  return GateDecision::Continue();
}

}  // namespace arscale
