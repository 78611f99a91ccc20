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

namespace arscale {

// Adaptive termination gate.
//
// A batch shares one threshold theta. During the warm-up phase the gate
// only collects confidence values; at warm-up end theta initializes to
// their p-quantile and afterwards tracks the quantile of recent values
// through an EMA, refreshed every update_interval steps. Per trajectory,
// the gate terminates when the running-minimum confidence sits below
// theta and no recovery event occurred within the trailing recovery
// window; an instantaneous confidence below c_hard terminates at any
// step. Steps are 1-based.

struct GateConfig {
  double warmup_frac = 0.125;     // W0: fraction of total steps
  double quantile = 0.2;          // p of the threshold quantile
  std::int64_t update_interval = 32;   // steps between threshold refreshes
  double lambda_theta = 0.2;      // EMA rate of the threshold update
  std::int64_t recovery_window = 32;   // steps a recovery event stays valid
  double delta_rec = 0.05;        // absolute rebound gap, condition (a)
  double r_thr = 0.10;            // relative rebound threshold, condition (b)
  double t_min_frac = 0.05;       // protection horizon as fraction of T
  double c_hard = 0.3;            // hard-fail guard on instantaneous C

  void validate() const;
};

enum class TerminationReason { kLowConfidence, kHardFail };

struct GateDecision {
  bool terminate = false;
  TerminationReason reason = TerminationReason::kLowConfidence;

  static GateDecision Continue() { return {}; }
  static GateDecision Terminate(TerminationReason r) { return {true, r}; }
  bool operator==(const GateDecision&) const = default;
};

/// Per-trajectory gate bookkeeping.
struct GateTrajState {
  std::optional<std::int64_t> last_recovery_step;
  bool marked_for_termination = false;
};

/// Batch-shared gate state: the threshold plus the value pools that feed
/// its initialization and EMA updates.
struct GateState {
  std::optional<double> theta_down;
  std::vector<double> warmup_values;   // C values pooled across trajectories
  std::vector<double> recent_values;   // since the last threshold refresh
};

/// Nearest-rank p-quantile: element ceil(p * n) of the ascending sort
/// (clamped to [1, n]). Empty input -> nullopt (gate stays uninitialized).
std::optional<double> init_threshold(std::span<const double> warmup_values,
                                     double p);

/// theta <- (1 - lambda) * theta + lambda * Quantile_p(recent);
/// empty recent leaves theta unchanged.
double update_threshold(double theta, std::span<const double> recent, double p,
                        double lambda_theta);

/// Records a recovery event at step t when either (a) C >= C_min + delta_rec
/// or (b) R >= r_thr holds (both inclusive), then reports whether any
/// event lies within the trailing window: t - event < recovery_window.
bool check_recovery(GateTrajState& state, double confidence,
                    double running_min, double rebound, const GateConfig& cfg,
                    std::int64_t t);

/// Protection horizon: the first step at which a low-confidence
/// termination may be issued, ceil(t_min_frac * total_steps).
std::int64_t protection_horizon(const GateConfig& cfg, std::int64_t total_steps);

/// Decision rule, in order: (i) C < c_hard -> hard fail at any step;
/// (ii) before the protection horizon or before theta initialization ->
/// continue; (iii) C_min < theta and no recovery within the trailing
/// window -> low-confidence termination; (iv) continue.
/// check_recovery must have run for this step before calling.
GateDecision gate_decision(const GateTrajState& state,
                           const std::optional<double>& theta,
                           double confidence, double running_min,
                           std::int64_t t, std::int64_t total_steps,
                           const GateConfig& cfg);

}  // namespace arscale
