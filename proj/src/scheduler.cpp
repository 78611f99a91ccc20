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

#include "arscale/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arscale {

void SchedulerConfig::validate() const {
  if (!(s_min <= s_base && s_base <= s_max)) {
    throw std::invalid_argument(
        "SchedulerConfig: requires s_min <= s_base <= s_max");
  }
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
    throw std::invalid_argument("SchedulerConfig: coefficients must be >= 0");
  }
  if (!(lambda_cfg > 0.0 && lambda_cfg <= 1.0)) {
    throw std::invalid_argument("SchedulerConfig: lambda_cfg must be in (0,1]");
  }
  if (epsilon_s < 0.0) {
    throw std::invalid_argument("SchedulerConfig: epsilon_s must be >= 0");
  }
  if (var_window < 1) {
    throw std::invalid_argument("SchedulerConfig: var_window must be >= 1");
  }
}

double recent_variance(const RollingWindow& buf) {
  if (buf.empty()) return 0.0;
  return buf.variance();
}

double raw_cfg_scale(double d_hat, double var_i, double rebound,
                     const SchedulerConfig& cfg) {
  return cfg.s_base + cfg.alpha * (1.0 - d_hat) + cfg.beta * var_i -
         cfg.gamma * rebound;
}

double schedule_cfg(SchedulerState& state, double s_raw,
                    const SchedulerConfig& cfg) {
  const double blended =
      (1.0 - cfg.lambda_cfg) * state.s_prev_ + cfg.lambda_cfg * s_raw;
  const double candidate = std::clamp(blended, cfg.s_min, cfg.s_max);
  if (std::abs(candidate - state.s_prev_) < cfg.epsilon_s) {
    return state.s_prev_;
  }
  state.s_prev_ = candidate;
  return candidate;
}

}  // namespace arscale
