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

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "arscale/engine.hpp"
#include "arscale/synthetic.hpp"

namespace arscale {

// Run configuration and its flat text format.
//
// Config files are line-oriented `dotted.key=value` pairs; `#` starts a
// comment. Every key has a built-in default, so an empty file runs the
// stock configuration (engine defaults plus a 4 stable / 4 pocket
// cohort). Unknown keys are rejected.

/// Raised for malformed files, unknown keys, or invalid values
/// (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { kScalingAr, kBaseline };
enum class TraceLevel { kNone, kSummary, kFull };

struct RunConfig {
  EngineConfig engine;
  std::vector<ScenarioSpec> cohort;  // one spec per trajectory
  RunMode mode = RunMode::kScalingAr;
  TraceLevel trace_level = TraceLevel::kFull;
  std::string out_dir;  // empty: keep everything in memory

  /// Syncs derived cohort fields (s_base_ref, block_size), applies the
  /// default cohort when none was configured, and checks that exactly
  /// one spec exists per trajectory. Throws ConfigError.
  void finalize();

  /// Cycles the cohort to `n` members and shrinks k_target/m_buf to
  /// match. Used by the --cohort-size override.
  void resize_cohort(std::int32_t n);
};

/// The stock 4 stable Good + 4 instability-pocket Doomed cohort for the
/// given engine shape (pocket onset at 20% of T, half-run duration).
std::vector<ScenarioSpec> default_cohort(const EngineConfig& engine);

RunConfig default_run_config();

/// Parses config text; keys override the defaults. Throws ConfigError.
RunConfig parse_config_text(std::string_view text);

/// Reads and parses a config file. Throws ConfigError (also when the
/// file cannot be read).
RunConfig load_config_file(const std::string& path);

std::string to_string(RunMode mode);
std::string to_string(TraceLevel level);
std::string to_string(ScenarioKind kind);
std::string to_string(TrajectoryLabel label);

}  // namespace arscale
