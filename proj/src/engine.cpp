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

#include "arscale/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arscale {

void EngineConfig::validate() const {
  if (k_target < 1) {
    throw std::invalid_argument("EngineConfig: k_target must be >= 1");
  }
  if (m_buf < 0) {
    throw std::invalid_argument("EngineConfig: m_buf must be >= 0");
  }
  if (grid_h < 1 || grid_w < 1 ||
      total_steps != static_cast<std::int64_t>(grid_h) * grid_w) {
    throw std::invalid_argument(
        "EngineConfig: total_steps must equal grid_h * grid_w");
  }
  if (vocab_size < 2) {
    throw std::invalid_argument("EngineConfig: vocab_size must be >= 2");
  }
  profile.validate();
  gate.validate();
  scheduler.validate();
}

double TrajectoryRecord::mean_confidence() const {
  if (trace.empty()) return 0.0;
  double acc = 0.0;
  for (const StepTrace& s : trace) acc += s.profile.confidence;
  return acc / static_cast<double>(trace.size());
}

TrajectoryEngine::TrajectoryEngine(EngineConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  warmup_steps_ = static_cast<std::int64_t>(
      std::ceil(cfg_.gate.warmup_frac * static_cast<double>(cfg_.total_steps)));
  const std::int32_t n = cfg_.batch_size();
  confidence_.reserve(n);
  gate_traj_.resize(static_cast<std::size_t>(n));
  records_.resize(static_cast<std::size_t>(n));
  for (std::int32_t i = 0; i < n; ++i) {
    confidence_.emplace_back(cfg_.grid_h, cfg_.grid_w, cfg_.profile);
    scheduler_.emplace_back(cfg_.scheduler);
    records_[static_cast<std::size_t>(i)].id = i;
  }
}

std::vector<TrajectoryId> TrajectoryEngine::active_ids() const {
  std::vector<TrajectoryId> ids;
  for (const TrajectoryRecord& r : records_) {
    if (r.status == TrajectoryStatus::kActive) ids.push_back(r.id);
  }
  return ids;
}

std::size_t TrajectoryEngine::active_count() const {
  return active_ids().size();
}

bool TrajectoryEngine::finished() const {
  return next_step_ > cfg_.total_steps || active_count() == 0;
}

std::vector<StepOutcome> TrajectoryEngine::step(
    std::span<const StepObservation> observations) {
  const std::int64_t t = next_step_;
  if (t > cfg_.total_steps) {
    throw std::invalid_argument("TrajectoryEngine: run already finished");
  }
  const GridPos expected_pos{static_cast<int>((t - 1) / cfg_.grid_w),
                             static_cast<int>((t - 1) % cfg_.grid_w)};

  // Lockstep barrier: a bijection between observations and active ids.
  const std::vector<TrajectoryId> active = active_ids();
  std::vector<const StepObservation*> by_id(records_.size(), nullptr);
  if (observations.size() != active.size()) {
    throw std::invalid_argument(
        "TrajectoryEngine: need exactly one observation per active trajectory");
  }
  for (const StepObservation& obs : observations) {
    if (obs.trajectory < 0 ||
        obs.trajectory >= static_cast<TrajectoryId>(records_.size()) ||
        records_[static_cast<std::size_t>(obs.trajectory)].status !=
            TrajectoryStatus::kActive) {
      throw std::invalid_argument(
          "TrajectoryEngine: observation for inactive trajectory");
    }
    if (by_id[static_cast<std::size_t>(obs.trajectory)] != nullptr) {
      throw std::invalid_argument("TrajectoryEngine: duplicate observation");
    }
    if (obs.step != t) {
      throw std::invalid_argument("TrajectoryEngine: observation step mismatch");
    }
    if (obs.pos.row != expected_pos.row || obs.pos.col != expected_pos.col) {
      throw std::invalid_argument(
          "TrajectoryEngine: position breaks raster order");
    }
    if (obs.cond.size() != cfg_.vocab_size ||
        obs.uncond.size() != cfg_.vocab_size) {
      throw std::invalid_argument("TrajectoryEngine: vocabulary size mismatch");
    }
    by_id[static_cast<std::size_t>(obs.trajectory)] = &obs;
  }

  const std::optional<double> theta = gate_state_.theta_down;
  std::vector<StepOutcome> outcomes;
  outcomes.reserve(active.size());

  for (TrajectoryId id : active) {
    const auto idx = static_cast<std::size_t>(id);
    const StepObservation& obs = *by_id[idx];
    ConfidenceState& conf = confidence_[idx];
    TrajectoryRecord& rec = records_[idx];

    const ProfileStepResult p =
        profile_step(conf, obs.cond, obs.uncond, obs.pos, cfg_.profile);

    GateDecision decision = GateDecision::Continue();
    if (cfg_.gate_enabled) {
      check_recovery(gate_traj_[idx], p.confidence, p.running_min, p.rebound,
                     cfg_.gate, t);
      decision = gate_decision(gate_traj_[idx], theta, p.confidence,
                               p.running_min, t, cfg_.total_steps, cfg_.gate);
    }

    rec.tokens_consumed = t;
    if (decision.terminate) {
      gate_traj_[idx].marked_for_termination = true;
      rec.status = TrajectoryStatus::kTerminated;
      rec.termination_reason = decision.reason;
      rec.termination_step = t;
    }

    // Threshold pools collect from every trajectory that reported this
    // step, including ones terminated at this very step.
    if (cfg_.gate_enabled) {
      if (t <= warmup_steps_) {
        gate_state_.warmup_values.push_back(p.confidence);
      } else {
        gate_state_.recent_values.push_back(p.confidence);
      }
    }

    double scale = cfg_.scheduler.s_base;
    if (cfg_.scheduler_enabled) {
      SchedulerState& sched = scheduler_[idx];
      sched.i_window().push(p.intrinsic);
      if (decision.terminate) {
        scale = sched.previous_scale();
      } else {
        const double raw = raw_cfg_scale(p.d_hat,
                                         recent_variance(sched.i_window()),
                                         p.rebound, cfg_.scheduler);
        scale = schedule_cfg(sched, raw, cfg_.scheduler);
      }
    }

    rec.trace.push_back({t, obs.pos, p, theta, decision, scale});
    outcomes.push_back({id, decision, scale});
  }

  if (cfg_.gate_enabled) {
    if (t == warmup_steps_) {
      gate_state_.theta_down =
          init_threshold(gate_state_.warmup_values, cfg_.gate.quantile);
    } else if (t > warmup_steps_ && gate_state_.theta_down &&
               (t - warmup_steps_) % cfg_.gate.update_interval == 0) {
      gate_state_.theta_down =
          update_threshold(*gate_state_.theta_down, gate_state_.recent_values,
                           cfg_.gate.quantile, cfg_.gate.lambda_theta);
      gate_state_.recent_values.clear();
    }
  }

  if (t == cfg_.total_steps) {
    for (TrajectoryRecord& rec : records_) {
      if (rec.status == TrajectoryStatus::kActive) {
        rec.status = TrajectoryStatus::kCompleted;
        rec.final_confidence = rec.trace.back().profile.confidence;
      }
    }
  }
  next_step_ = t + 1;
  return outcomes;
}

std::optional<TrajectoryId> TrajectoryEngine::select_winner() const {
  std::optional<TrajectoryId> best;
  double best_final = 0.0;
  double best_mean = 0.0;
  for (const TrajectoryRecord& r : records_) {
    if (r.status != TrajectoryStatus::kCompleted) continue;
    const double fin = *r.final_confidence;
    const double mean = r.mean_confidence();
    if (!best || fin > best_final ||
        (fin == best_final && mean > best_mean)) {
      best = r.id;
      best_final = fin;
      best_mean = mean;
    }
  }
  return best;
}

TokenAccounting TrajectoryEngine::token_accounting() const {
  std::int64_t total = 0;
  for (const TrajectoryRecord& r : records_) total += r.tokens_consumed;
  const double capacity = static_cast<double>(cfg_.batch_size()) *
                          static_cast<double>(cfg_.total_steps);
  return {total, 1.0 - static_cast<double>(total) / capacity};
}

const TrajectoryRecord& TrajectoryEngine::record(TrajectoryId id) const {
  if (id < 0 || id >= static_cast<TrajectoryId>(records_.size())) {
    throw std::invalid_argument("TrajectoryEngine: unknown trajectory id");
  }
  return records_[static_cast<std::size_t>(id)];
}

}  // namespace arscale
