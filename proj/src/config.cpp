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

#include "arscale/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace arscale {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("config: bad numeric value for " + std::string(key));
  }
  return out;
}

std::int64_t parse_int(std::string_view key, std::string_view value) {
  std::int64_t out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("config: bad integer value for " + std::string(key));
  }
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("config: bad unsigned value for " + std::string(key));
  }
  return out;
}

std::vector<int> parse_block_list(std::string_view key, std::string_view value) {
  if (value == "all") return {};
  std::vector<int> blocks;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    const std::string_view item =
        trim(value.substr(start, comma == std::string_view::npos
                                     ? std::string_view::npos
                                     : comma - start));
    if (item.empty()) {
      throw ConfigError("config: empty block index in " + std::string(key));
    }
    blocks.push_back(static_cast<int>(parse_int(key, item)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return blocks;
}

void apply_profile_key(ProfileConfig& p, std::string_view key,
                       std::string_view field, std::string_view value) {
  if (field == "alpha_h") p.alpha_h = parse_double(key, value);
  else if (field == "alpha_m") p.alpha_m = parse_double(key, value);
  else if (field == "lambda_tok") p.lambda_tok = parse_double(key, value);
  else if (field == "block_size") p.block_size = static_cast<int>(parse_int(key, value));
  else if (field == "rho_min") p.rho_min = parse_double(key, value);
  else if (field == "rho_min_mode") {
    if (value == "fraction") p.rho_min_is_count = false;
    else if (value == "count") p.rho_min_is_count = true;
    else throw ConfigError("config: profile.rho_min_mode must be fraction|count");
  } else if (field == "q_worst") p.q_worst = parse_double(key, value);
  else if (field == "minmax_window") p.minmax_window = static_cast<std::size_t>(parse_int(key, value));
  else if (field == "w_tok") p.w_tok = parse_double(key, value);
  else if (field == "w_blk") p.w_blk = parse_double(key, value);
  else if (field == "lambda_i") p.lambda_i = parse_double(key, value);
  else if (field == "z_max") p.z_max = parse_double(key, value);
  else if (field == "zscore_window") p.zscore_window = static_cast<std::size_t>(parse_int(key, value));
  else if (field == "lambda_d") p.lambda_d = parse_double(key, value);
  else if (field == "w_i") p.w_i = parse_double(key, value);
  else if (field == "w_d") p.w_d = parse_double(key, value);
  else if (field == "calibration") {
    if (value == "none") p.calibration = CalibrationKind::kNone;
    else if (value == "affine_sigmoid") p.calibration = CalibrationKind::kAffineSigmoid;
    else throw ConfigError("config: profile.calibration must be none|affine_sigmoid");
  } else if (field == "calibration_a") p.calibration_a = parse_double(key, value);
  else if (field == "calibration_c") p.calibration_c = parse_double(key, value);
  else if (field == "epsilon") p.epsilon = parse_double(key, value);
  else throw ConfigError("config: unknown key " + std::string(key));
}

void apply_gate_key(GateConfig& g, std::string_view key, std::string_view field,
                    std::string_view value) {
  if (field == "warmup_frac") g.warmup_frac = parse_double(key, value);
  else if (field == "quantile") g.quantile = parse_double(key, value);
  else if (field == "update_interval") g.update_interval = parse_int(key, value);
  else if (field == "lambda_theta") g.lambda_theta = parse_double(key, value);
  else if (field == "recovery_window") g.recovery_window = parse_int(key, value);
  else if (field == "delta_rec") g.delta_rec = parse_double(key, value);
  else if (field == "r_thr") g.r_thr = parse_double(key, value);
  else if (field == "t_min_frac") g.t_min_frac = parse_double(key, value);
  else if (field == "c_hard") g.c_hard = parse_double(key, value);
  else throw ConfigError("config: unknown key " + std::string(key));
}

void apply_scheduler_key(SchedulerConfig& s, std::string_view key,
                         std::string_view field, std::string_view value) {
  if (field == "s_base") s.s_base = parse_double(key, value);
  else if (field == "alpha") s.alpha = parse_double(key, value);
  else if (field == "beta") s.beta = parse_double(key, value);
  else if (field == "gamma") s.gamma = parse_double(key, value);
  else if (field == "lambda_cfg") s.lambda_cfg = parse_double(key, value);
  else if (field == "s_min") s.s_min = parse_double(key, value);
  else if (field == "s_max") s.s_max = parse_double(key, value);
  else if (field == "epsilon_s") s.epsilon_s = parse_double(key, value);
  else if (field == "var_window") s.var_window = static_cast<std::size_t>(parse_int(key, value));
  else throw ConfigError("config: unknown key " + std::string(key));
}

void apply_engine_key(EngineConfig& e, std::string_view key,
                      std::string_view field, std::string_view value) {
  if (field == "k_target") e.k_target = static_cast<std::int32_t>(parse_int(key, value));
  else if (field == "m_buf") e.m_buf = static_cast<std::int32_t>(parse_int(key, value));
  else if (field == "grid_h") e.grid_h = static_cast<int>(parse_int(key, value));
  else if (field == "grid_w") e.grid_w = static_cast<int>(parse_int(key, value));
  else if (field == "vocab") e.vocab_size = parse_int(key, value);
  else if (field == "seed") e.seed = parse_uint(key, value);
  else throw ConfigError("config: unknown key " + std::string(key));
}

void apply_cohort_key(ScenarioSpec& spec, std::string_view key,
                      std::string_view field, std::string_view value) {
  if (field == "kind") {
    if (value == "stable") spec.kind = ScenarioKind::kStable;
    else if (value == "pocket") spec.kind = ScenarioKind::kInstabilityPocket;
    else if (value == "fade") spec.kind = ScenarioKind::kSemanticFade;
    else throw ConfigError("config: cohort kind must be stable|pocket|fade");
  } else if (field == "label") {
    if (value == "good") spec.label = TrajectoryLabel::kGood;
    else if (value == "doomed") spec.label = TrajectoryLabel::kDoomed;
    else throw ConfigError("config: cohort label must be good|doomed");
  } else if (field == "concentration") spec.concentration = parse_double(key, value);
  else if (field == "entropy_jitter") spec.entropy_jitter = parse_double(key, value);
  else if (field == "uncond_gap") spec.uncond_gap = parse_double(key, value);
  else if (field == "onset") spec.onset = parse_int(key, value);
  else if (field == "duration") spec.duration = parse_int(key, value);
  else if (field == "entropy_level") spec.entropy_level = parse_double(key, value);
  else if (field == "blocks") spec.affected_blocks = parse_block_list(key, value);
  else if (field == "fade_start") spec.fade_start = parse_int(key, value);
  else if (field == "fade_rate") spec.fade_rate = parse_double(key, value);
  else if (field == "seed") spec.seed = parse_uint(key, value);
  else throw ConfigError("config: unknown key " + std::string(key));
}

}  // namespace

std::vector<ScenarioSpec> default_cohort(const EngineConfig& engine) {
  const std::int64_t total = engine.total_steps;
  std::vector<ScenarioSpec> cohort;
  for (std::int32_t i = 0; i < engine.batch_size(); ++i) {
    ScenarioSpec spec;
    spec.vocab_size = engine.vocab_size;
    spec.grid_h = engine.grid_h;
    spec.grid_w = engine.grid_w;
    if (i % 2 == 1) {
      spec.kind = ScenarioKind::kInstabilityPocket;
      spec.label = TrajectoryLabel::kDoomed;
      spec.onset = total / 5 + 1;  // 20% of the run
      spec.duration = std::max<std::int64_t>(1, std::min(total / 2, total - spec.onset));
      spec.entropy_level = 0.95;
    }
    cohort.push_back(spec);
  }
  return cohort;
}

void RunConfig::finalize() {
  try {
    if (cohort.empty()) cohort = default_cohort(engine);
    if (static_cast<std::int32_t>(cohort.size()) != engine.batch_size()) {
      throw ConfigError(
          "config: cohort size must equal k_target + m_buf (" +
          std::to_string(engine.batch_size()) + "), got " +
          std::to_string(cohort.size()));
    }
    const std::int64_t total =
        static_cast<std::int64_t>(engine.grid_h) * engine.grid_w;
    for (ScenarioSpec& spec : cohort) {
      spec.vocab_size = engine.vocab_size;
      spec.grid_h = engine.grid_h;
      spec.grid_w = engine.grid_w;
      spec.block_size = engine.profile.block_size;
      spec.s_base_ref = engine.scheduler.s_base;
      // Kind-specific timing defaults: onset/fade at 20% of the run,
      // pockets lasting half of it.
      if (spec.kind == ScenarioKind::kInstabilityPocket) {
        if (spec.onset == 0) spec.onset = total / 5 + 1;
        if (spec.duration == 0) {
          spec.duration =
              std::max<std::int64_t>(1, std::min(total / 2, total - spec.onset));
        }
      }
      if (spec.kind == ScenarioKind::kSemanticFade && spec.fade_start == 0) {
        spec.fade_start = total / 5 + 1;
      }
      spec.validate();
    }
    engine.total_steps = static_cast<std::int64_t>(engine.grid_h) * engine.grid_w;
    engine.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void RunConfig::resize_cohort(std::int32_t n) {
  if (n < 1) throw ConfigError("config: cohort size override must be >= 1");
  if (cohort.empty()) cohort = default_cohort(engine);
  std::vector<ScenarioSpec> cycled;
  cycled.reserve(static_cast<std::size_t>(n));
  for (std::int32_t i = 0; i < n; ++i) {
    cycled.push_back(cohort[static_cast<std::size_t>(i) % cohort.size()]);
  }
  cohort = std::move(cycled);
  engine.k_target = std::min(engine.k_target, n);
  engine.m_buf = n - engine.k_target;
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.cohort = default_cohort(cfg.engine);
  return cfg;
}

RunConfig parse_config_text(std::string_view text) {
  RunConfig cfg;
  std::map<int, ScenarioSpec> cohort_specs;

  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not key=value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " has empty key or value");
    }

    const std::size_t dot = key.find('.');
    const std::string_view section = key.substr(0, dot);
    if (section == "profile" && dot != std::string_view::npos) {
      apply_profile_key(cfg.engine.profile, key, key.substr(dot + 1), value);
    } else if (section == "gate" && dot != std::string_view::npos) {
      apply_gate_key(cfg.engine.gate, key, key.substr(dot + 1), value);
    } else if (section == "scheduler" && dot != std::string_view::npos) {
      apply_scheduler_key(cfg.engine.scheduler, key, key.substr(dot + 1), value);
    } else if (section == "engine" && dot != std::string_view::npos) {
      apply_engine_key(cfg.engine, key, key.substr(dot + 1), value);
    } else if (section == "run" && dot != std::string_view::npos) {
      const std::string_view field = key.substr(dot + 1);
      if (field == "mode") {
        if (value == "scalingar") cfg.mode = RunMode::kScalingAr;
        else if (value == "baseline") cfg.mode = RunMode::kBaseline;
        else throw ConfigError("config: run.mode must be scalingar|baseline");
      } else if (field == "trace_level") {
        if (value == "none") cfg.trace_level = TraceLevel::kNone;
        else if (value == "summary") cfg.trace_level = TraceLevel::kSummary;
        else if (value == "full") cfg.trace_level = TraceLevel::kFull;
        else throw ConfigError("config: run.trace_level must be none|summary|full");
      } else {
        throw ConfigError("config: unknown key " + std::string(key));
      }
    } else if (section == "cohort" && dot != std::string_view::npos) {
      const std::string_view rest = key.substr(dot + 1);
      const std::size_t dot2 = rest.find('.');
      if (dot2 == std::string_view::npos) {
        throw ConfigError("config: cohort keys are cohort.<index>.<field>");
      }
      const int index = static_cast<int>(parse_int(key, rest.substr(0, dot2)));
      if (index < 0) throw ConfigError("config: negative cohort index");
      apply_cohort_key(cohort_specs[index], key, rest.substr(dot2 + 1), value);
    } else {
      throw ConfigError("config: unknown key " + std::string(key));
    }
  }

  if (!cohort_specs.empty()) {
    int expected = 0;
    for (const auto& [index, spec] : cohort_specs) {
      if (index != expected++) {
        throw ConfigError("config: cohort indices must be contiguous from 0");
      }
      cfg.cohort.push_back(spec);
    }
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string to_string(RunMode mode) {
  return mode == RunMode::kScalingAr ? "scalingar" : "baseline";
}

std::string to_string(TraceLevel level) {
  switch (level) {
    case TraceLevel::kNone: return "none";
    case TraceLevel::kSummary: return "summary";
    case TraceLevel::kFull: return "full";
  }
  return "full";
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kStable: return "stable";
    case ScenarioKind::kInstabilityPocket: return "pocket";
    case ScenarioKind::kSemanticFade: return "fade";
  }
  return "stable";
}

std::string to_string(TrajectoryLabel label) {
  return label == TrajectoryLabel::kGood ? "good" : "doomed";
}

}  // namespace arscale
