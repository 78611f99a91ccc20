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

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "arscale/config.hpp"
#include "arscale/harness.hpp"
#include "arscale/textio.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "arscale: confidence-profiled trajectory pruning and guidance "
      "scheduling for autoregressive decoding, on synthetic streams"};

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::string out_dir = "out";
  std::optional<std::string> trace_level;
  std::optional<std::int32_t> cohort_size;

  app.add_option("--config", config_path, "config file (dotted key=value lines)");
  app.add_option("--seed", seed, "run seed (overrides engine.seed)");
  app.add_option("--mode", mode, "scalingar|baseline")
      ->check(CLI::IsMember({"scalingar", "baseline"}));
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--trace-level", trace_level, "none|summary|full")
      ->check(CLI::IsMember({"none", "summary", "full"}));
  app.add_option("--cohort-size", cohort_size,
                 "override the number of trajectories (cycles the cohort)");

  CLI11_PARSE(app, argc, argv);

  arscale::RunConfig cfg;
  try {
    cfg = config_path.empty() ? arscale::default_run_config()
                              : arscale::load_config_file(config_path);
    if (seed) cfg.engine.seed = *seed;
    if (mode) {
      cfg.mode = *mode == "baseline" ? arscale::RunMode::kBaseline
                                     : arscale::RunMode::kScalingAr;
    }
    if (trace_level) {
      cfg.trace_level = *trace_level == "none" ? arscale::TraceLevel::kNone
                        : *trace_level == "summary"
                            ? arscale::TraceLevel::kSummary
                            : arscale::TraceLevel::kFull;
    }
    if (cohort_size) cfg.resize_cohort(*cohort_size);
    cfg.out_dir = out_dir;
    cfg.finalize();
  } catch (const arscale::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    const arscale::RunResult result = arscale::run(cfg);
    const arscale::Metrics& m = result.metrics;
    std::cout << "run " << m.run_id << " finished\n";
    std::cout << "  trajectories: " << m.outcomes.size()
              << "  total_tokens: " << m.total_tokens
              << "  token_savings: " << arscale::format_double(m.token_savings, 6)
              << "\n";
    std::cout << "  pruning precision: "
              << arscale::format_double(m.pruning_precision, 6)
              << (m.precision_degenerate ? " (degenerate)" : "")
              << "  recall: " << arscale::format_double(m.pruning_recall, 6)
              << (m.recall_degenerate ? " (degenerate)" : "") << "\n";
    if (m.winner) {
      std::cout << "  winner: trajectory " << *m.winner << " ("
                << arscale::to_string(*m.winner_label) << ")\n";
    } else {
      std::cout << "  winner: none (no trajectory completed)\n";
    }
    for (const std::string& f : result.files_written) {
      std::cout << "  wrote " << f << "\n";
    }
    return 0;
  } catch (const arscale::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}
