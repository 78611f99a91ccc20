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

#include "arscale/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "arscale/textio.hpp"

namespace arscale {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t spec_seed,
                          std::size_t index) {
  return splitmix64(run_seed ^ splitmix64(spec_seed + index + 1));
}

std::string decision_token(const GateDecision& d) {
  if (!d.terminate) return "continue";
  return d.reason == TerminationReason::kHardFail ? "term_hard" : "term_low";
}

std::string reason_token(const std::optional<TerminationReason>& r) {
  if (!r) return "none";
  return *r == TerminationReason::kHardFail ? "hard_fail" : "low_confidence";
}

std::string status_token(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::kActive: return "active";
    case TrajectoryStatus::kTerminated: return "terminated";
    case TrajectoryStatus::kCompleted: return "completed";
  }
  return "active";
}

std::string fmt9(double v) { return format_double(v, 9); }
std::string fmt6(double v) { return format_double(v, 6); }

struct PhaseAccumulator {
  double warmup_sum = 0.0;
  std::int64_t warmup_n = 0;
  double early_sum = 0.0;
  std::int64_t early_n = 0;
  double mid_sum = 0.0;
  std::int64_t mid_n = 0;
  double late_sum = 0.0;
  std::int64_t late_n = 0;

  void add(std::int64_t t, std::int64_t total, std::int64_t warmup, double s) {
    if (t <= warmup) {
      warmup_sum += s;
      ++warmup_n;
    }
    if (3 * t <= total) {
      early_sum += s;
      ++early_n;
    } else if (3 * t <= 2 * total) {
      mid_sum += s;
      ++mid_n;
    } else {
      late_sum += s;
      ++late_n;
    }
  }

  static double mean(double sum, std::int64_t n) {
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
};

int histogram_bin(double c) {
  const double clamped = std::clamp(c, 0.0, 1.0);
  return std::min(ConfidenceHistogram::kBins - 1,
                  static_cast<int>(clamped * ConfidenceHistogram::kBins));
}

Metrics build_metrics(const std::string& run_id, RunMode mode,
                      const std::vector<TrajectoryRecord>& records,
                      const std::vector<ScenarioSpec>& cohort,
                      const TokenAccounting& accounting,
                      std::optional<TrajectoryId> winner,
                      std::int64_t total_steps, std::int64_t warmup_steps) {
  Metrics m;
  m.run_id = run_id;
  m.mode = mode;
  m.total_tokens = accounting.total_tokens;
  m.token_savings = accounting.saved_fraction;
  m.winner = winner;

  std::int64_t terminated = 0;
  std::int64_t terminated_doomed = 0;
  std::int64_t doomed = 0;
  PhaseAccumulator phases;

  for (const TrajectoryRecord& r : records) {
    const ScenarioSpec& spec = cohort[static_cast<std::size_t>(r.id)];
    TrajectoryOutcome out;
    out.id = r.id;
    out.label = spec.label;
    out.scenario = spec.kind;
    out.status = r.status;
    out.reason = r.termination_reason;
    out.tokens = r.tokens_consumed;
    out.final_confidence = r.final_confidence;

    double c_sum = 0.0;
    double c_min = std::numeric_limits<double>::infinity();
    double s_sum = 0.0;
    for (const StepTrace& st : r.trace) {
      c_sum += st.profile.confidence;
      c_min = std::min(c_min, st.profile.confidence);
      s_sum += st.cfg_scale;
      phases.add(st.step, total_steps, warmup_steps, st.cfg_scale);
      m.histogram.counts[static_cast<std::size_t>(
          histogram_bin(st.profile.confidence))] += 1;
    }
    const auto n = static_cast<double>(r.trace.size());
    out.mean_confidence = r.trace.empty() ? 0.0 : c_sum / n;
    out.min_confidence = r.trace.empty() ? 0.0 : c_min;
    out.mean_scale = r.trace.empty() ? 0.0 : s_sum / n;
    m.outcomes.push_back(out);

    if (spec.label == TrajectoryLabel::kDoomed) ++doomed;
    if (r.status == TrajectoryStatus::kTerminated) {
      ++terminated;
      if (spec.label == TrajectoryLabel::kDoomed) ++terminated_doomed;
    }
  }

  m.precision_degenerate = terminated == 0;
  m.pruning_precision =
      m.precision_degenerate
          ? 1.0
          : static_cast<double>(terminated_doomed) / static_cast<double>(terminated);
  m.recall_degenerate = doomed == 0;
  m.pruning_recall =
      m.recall_degenerate
          ? 1.0
          : static_cast<double>(terminated_doomed) / static_cast<double>(doomed);
  if (winner) {
    m.winner_label = cohort[static_cast<std::size_t>(*winner)].label;
  }
  m.mean_scale_warmup = PhaseAccumulator::mean(phases.warmup_sum, phases.warmup_n);
  m.mean_scale_early = PhaseAccumulator::mean(phases.early_sum, phases.early_n);
  m.mean_scale_mid = PhaseAccumulator::mean(phases.mid_sum, phases.mid_n);
  m.mean_scale_late = PhaseAccumulator::mean(phases.late_sum, phases.late_n);
  return m;
}

void append_step_line(std::string& out, const std::string& run_id,
                      TrajectoryId id, const StepTrace& st) {
  // Field order is part of the trace contract; see README.
  out += "run=" + run_id;
  out += " traj=" + std::to_string(id);
  out += " step=" + std::to_string(st.step);
  out += " row=" + std::to_string(st.pos.row);
  out += " col=" + std::to_string(st.pos.col);
  out += " h_norm=" + fmt9(st.profile.h_norm);
  out += " margin=" + fmt9(st.profile.margin);
  out += " s_tok=" + fmt9(st.profile.s_tok);
  out += " e_worst=" + fmt9(st.profile.e_worst);
  out += " b_stab=" + fmt9(st.profile.b_stability);
  out += " i=" + fmt9(st.profile.intrinsic);
  out += " k=" + fmt9(st.profile.kl);
  out += " d=" + fmt9(st.profile.d_raw);
  out += " d_hat=" + fmt9(st.profile.d_hat);
  out += " c=" + fmt9(st.profile.confidence);
  out += " c_min=" + fmt9(st.profile.running_min);
  out += " r=" + fmt9(st.profile.rebound);
  out += " theta=" + (st.threshold ? fmt9(*st.threshold) : std::string("none"));
  out += " decision=" + decision_token(st.decision);
  out += " s_cfg=" + fmt9(st.cfg_scale);
  out += "\n";
}

std::string build_trace_text(const std::string& run_id, const RunConfig& cfg,
                             const std::vector<TrajectoryRecord>& records,
                             std::int64_t warmup_steps, TraceLevel level) {
  std::string out;
  out += "meta run=" + run_id + " mode=" + to_string(cfg.mode) +
         " seed=" + std::to_string(cfg.engine.seed) +
         " steps=" + std::to_string(cfg.engine.total_steps) +
         " warmup=" + std::to_string(warmup_steps) + " grid=" +
         std::to_string(cfg.engine.grid_h) + "x" +
         std::to_string(cfg.engine.grid_w) +
         " vocab=" + std::to_string(cfg.engine.vocab_size) +
         " k_target=" + std::to_string(cfg.engine.k_target) +
         " m_buf=" + std::to_string(cfg.engine.m_buf) + "\n";
  for (std::size_t i = 0; i < cfg.cohort.size(); ++i) {
    out += "meta run=" + run_id + " traj=" + std::to_string(i) +
           " label=" + to_string(cfg.cohort[i].label) +
           " scenario=" + to_string(cfg.cohort[i].kind) + "\n";
  }
  if (level == TraceLevel::kFull) {
    // One line per (trajectory, step), step-major to mirror execution.
    std::size_t max_len = 0;
    for (const TrajectoryRecord& r : records) {
      max_len = std::max(max_len, r.trace.size());
    }
    for (std::size_t s = 0; s < max_len; ++s) {
      for (const TrajectoryRecord& r : records) {
        if (s < r.trace.size()) {
          append_step_line(out, run_id, r.id, r.trace[s]);
        }
      }
    }
  }
  for (const TrajectoryRecord& r : records) {
    out += "end run=" + run_id + " traj=" + std::to_string(r.id) +
           " status=" + status_token(r.status) +
           " reason=" + reason_token(r.termination_reason) +
           " tokens=" + std::to_string(r.tokens_consumed) + " final_c=" +
           (r.final_confidence ? fmt9(*r.final_confidence) : std::string("none")) +
           "\n";
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text,
                std::vector<std::string>& files_written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("harness: cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw std::runtime_error("harness: short write to " + path.string());
  }
  files_written.push_back(path.string());
}

}  // namespace

std::int64_t ConfidenceHistogram::total() const {
  std::int64_t t = 0;
  for (const std::int64_t c : counts) t += c;
  return t;
}

RunResult run(const RunConfig& config) {
  RunConfig cfg = config;
  cfg.finalize();
  if (cfg.mode == RunMode::kBaseline) {
    cfg.engine.gate_enabled = false;
    cfg.engine.scheduler_enabled = false;
  }

  // Per-trajectory stream seeds derive from the run seed, so --seed
  // reshuffles every stream while staying reproducible.
  std::vector<ScenarioSpec> seeded = cfg.cohort;
  for (std::size_t i = 0; i < seeded.size(); ++i) {
    seeded[i].seed = derive_seed(cfg.engine.seed, seeded[i].seed, i);
  }
  std::vector<SyntheticSource> sources = make_cohort(seeded);
  TrajectoryEngine engine(cfg.engine);

  std::vector<double> scales(sources.size(), cfg.engine.scheduler.s_base);
  while (!engine.finished()) {
    std::vector<StepObservation> observations;
    observations.reserve(engine.active_count());
    for (TrajectoryId id : engine.active_ids()) {
      const auto idx = static_cast<std::size_t>(id);
      observations.push_back(sources[idx].next(scales[idx]));
    }
    for (const StepOutcome& out : engine.step(observations)) {
      scales[static_cast<std::size_t>(out.id)] = out.cfg_scale;
    }
  }

  const std::string run_id =
      "r" + std::to_string(cfg.engine.seed) + "-" + to_string(cfg.mode);
  RunResult result;
  result.metrics = build_metrics(run_id, cfg.mode, engine.records(), cfg.cohort,
                                 engine.token_accounting(),
                                 engine.select_winner(), cfg.engine.total_steps,
                                 engine.warmup_steps());
  result.records = engine.records();

  if (!cfg.out_dir.empty()) {
    const std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
      throw std::runtime_error("harness: cannot create output dir " +
                               dir.string() + ": " + ec.message());
    }
    if (cfg.trace_level != TraceLevel::kNone) {
      write_file(dir / "trace.log",
                 build_trace_text(run_id, cfg, engine.records(),
                                  engine.warmup_steps(), cfg.trace_level),
                 result.files_written);
    }
    std::string csv;
    for (const std::string& row : emit_metrics(result.metrics)) {
      csv += row;
      csv += "\n";
    }
    write_file(dir / "metrics.csv", csv, result.files_written);

    std::string hist = "bin_lo,bin_hi,count\n";
    for (int b = 0; b < ConfidenceHistogram::kBins; ++b) {
      const double lo = static_cast<double>(b) / ConfidenceHistogram::kBins;
      const double hi = static_cast<double>(b + 1) / ConfidenceHistogram::kBins;
      hist += fmt6(lo) + "," + fmt6(hi) + "," +
              std::to_string(result.metrics.histogram.counts[static_cast<std::size_t>(b)]) +
              "\n";
    }
    write_file(dir / "confidence_histogram.csv", hist, result.files_written);
  }
  return result;
}

std::vector<std::string> emit_metrics(const Metrics& m) {
  std::vector<std::string> rows;
  rows.push_back(
      "run,row_kind,traj,label,scenario,status,reason,tokens,final_c,mean_c,"
      "min_c,mean_s,precision,recall,precision_degenerate,recall_degenerate,"
      "token_savings,total_tokens,winner,winner_label,mean_s_warmup,"
      "mean_s_early,mean_s_mid,mean_s_late");
  for (const TrajectoryOutcome& o : m.outcomes) {
    std::string row = m.run_id + ",trajectory," + std::to_string(o.id) + "," +
                      to_string(o.label) + "," + to_string(o.scenario) + "," +
                      status_token(o.status) + "," + reason_token(o.reason) +
                      "," + std::to_string(o.tokens) + "," +
                      (o.final_confidence ? fmt6(*o.final_confidence) : "") +
                      "," + fmt6(o.mean_confidence) + "," +
                      fmt6(o.min_confidence) + "," + fmt6(o.mean_scale);
    row += ",,,,,,,,,,,,";  // summary-only columns stay empty
    rows.push_back(row);
  }
  std::string summary = m.run_id + ",summary,,,,,,,,,,";
  summary += "," + fmt6(m.pruning_precision);
  summary += "," + fmt6(m.pruning_recall);
  summary += std::string(",") + (m.precision_degenerate ? "1" : "0");
  summary += std::string(",") + (m.recall_degenerate ? "1" : "0");
  summary += "," + fmt6(m.token_savings);
  summary += "," + std::to_string(m.total_tokens);
  summary += "," + (m.winner ? std::to_string(*m.winner) : std::string("none"));
  summary += "," + (m.winner_label ? to_string(*m.winner_label) : std::string("none"));
  summary += "," + fmt6(m.mean_scale_warmup);
  summary += "," + fmt6(m.mean_scale_early);
  summary += "," + fmt6(m.mean_scale_mid);
  summary += "," + fmt6(m.mean_scale_late);
  rows.push_back(summary);
  return rows;
}

namespace {

std::map<std::string, std::string> parse_kv_line(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream in(line);
  std::string token;
  while (in >> token) {
    const std::size_t eq = token.find('=');
    if (eq != std::string::npos) {
      kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
  }
  return kv;
}

}  // namespace

Metrics recompute_metrics_from_trace(const std::string& trace_text) {
  struct TrajAgg {
    TrajectoryLabel label = TrajectoryLabel::kGood;
    ScenarioKind scenario = ScenarioKind::kStable;
    TrajectoryStatus status = TrajectoryStatus::kActive;
    std::optional<TerminationReason> reason;
    std::int64_t tokens = 0;
    std::optional<double> final_confidence;
    std::vector<double> confidences;
    std::vector<double> scales;
    std::vector<std::int64_t> steps;
  };
  std::map<int, TrajAgg> trajs;
  std::string run_id;
  RunMode mode = RunMode::kScalingAr;
  std::int64_t total_steps = 0;
  std::int64_t warmup_steps = 0;
  std::int64_t batch = 0;

  std::istringstream in(trace_text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto kv = parse_kv_line(line);
    if (line.rfind("meta ", 0) == 0) {
      if (kv.count("k_target")) {
        run_id = kv["run"];
        mode = kv["mode"] == "baseline" ? RunMode::kBaseline : RunMode::kScalingAr;
        total_steps = std::stoll(kv["steps"]);
        warmup_steps = std::stoll(kv["warmup"]);
        batch = std::stoll(kv["k_target"]) + std::stoll(kv["m_buf"]);
      } else if (kv.count("traj")) {
        TrajAgg& t = trajs[std::stoi(kv["traj"])];
        t.label = kv["label"] == "doomed" ? TrajectoryLabel::kDoomed
                                          : TrajectoryLabel::kGood;
        t.scenario = kv["scenario"] == "pocket" ? ScenarioKind::kInstabilityPocket
                     : kv["scenario"] == "fade" ? ScenarioKind::kSemanticFade
                                                : ScenarioKind::kStable;
      }
    } else if (line.rfind("end ", 0) == 0) {
      TrajAgg& t = trajs[std::stoi(kv["traj"])];
      t.status = kv["status"] == "completed" ? TrajectoryStatus::kCompleted
                                             : TrajectoryStatus::kTerminated;
      if (kv["reason"] == "hard_fail") t.reason = TerminationReason::kHardFail;
      else if (kv["reason"] == "low_confidence") {
        t.reason = TerminationReason::kLowConfidence;
      }
      t.tokens = std::stoll(kv["tokens"]);
      if (kv["final_c"] != "none") t.final_confidence = std::stod(kv["final_c"]);
    } else if (kv.count("step")) {
      TrajAgg& t = trajs[std::stoi(kv["traj"])];
      t.confidences.push_back(std::stod(kv["c"]));
      t.scales.push_back(std::stod(kv["s_cfg"]));
      t.steps.push_back(std::stoll(kv["step"]));
    }
  }

  Metrics m;
  m.run_id = run_id;
  m.mode = mode;
  std::int64_t terminated = 0;
  std::int64_t terminated_doomed = 0;
  std::int64_t doomed = 0;
  std::int64_t total_tokens = 0;
  PhaseAccumulator phases;
  std::optional<TrajectoryId> winner;
  double best_final = 0.0;
  double best_mean = 0.0;

  for (const auto& [id, t] : trajs) {
    TrajectoryOutcome o;
    o.id = id;
    o.label = t.label;
    o.scenario = t.scenario;
    o.status = t.status;
    o.reason = t.reason;
    o.tokens = t.tokens;
    o.final_confidence = t.final_confidence;
    double c_sum = 0.0;
    double c_min = std::numeric_limits<double>::infinity();
    for (double c : t.confidences) {
      c_sum += c;
      c_min = std::min(c_min, c);
      m.histogram.counts[static_cast<std::size_t>(histogram_bin(c))] += 1;
    }
    double s_sum = 0.0;
    for (std::size_t i = 0; i < t.scales.size(); ++i) {
      s_sum += t.scales[i];
      phases.add(t.steps[i], total_steps, warmup_steps, t.scales[i]);
    }
    const auto n = static_cast<double>(t.confidences.size());
    o.mean_confidence = t.confidences.empty() ? 0.0 : c_sum / n;
    o.min_confidence = t.confidences.empty() ? 0.0 : c_min;
    o.mean_scale = t.scales.empty() ? 0.0 : s_sum / n;
    m.outcomes.push_back(o);

    total_tokens += t.tokens;
    if (t.label == TrajectoryLabel::kDoomed) ++doomed;
    if (t.status == TrajectoryStatus::kTerminated) {
      ++terminated;
      if (t.label == TrajectoryLabel::kDoomed) ++terminated_doomed;
    }
    if (t.status == TrajectoryStatus::kCompleted && t.final_confidence) {
      const double mean = o.mean_confidence;
      if (!winner || *t.final_confidence > best_final ||
          (*t.final_confidence == best_final && mean > best_mean)) {
        winner = id;
        best_final = *t.final_confidence;
        best_mean = mean;
      }
    }
  }

  m.precision_degenerate = terminated == 0;
  m.pruning_precision =
      m.precision_degenerate
          ? 1.0
          : static_cast<double>(terminated_doomed) / static_cast<double>(terminated);
  m.recall_degenerate = doomed == 0;
  m.pruning_recall =
      m.recall_degenerate
          ? 1.0
          : static_cast<double>(terminated_doomed) / static_cast<double>(doomed);
  m.total_tokens = total_tokens;
  m.token_savings = 1.0 - static_cast<double>(total_tokens) /
                              (static_cast<double>(batch) *
                               static_cast<double>(total_steps));
  m.winner = winner;
  if (winner) m.winner_label = trajs[*winner].label;
  m.mean_scale_warmup = PhaseAccumulator::mean(phases.warmup_sum, phases.warmup_n);
  m.mean_scale_early = PhaseAccumulator::mean(phases.early_sum, phases.early_n);
  m.mean_scale_mid = PhaseAccumulator::mean(phases.mid_sum, phases.mid_n);
  m.mean_scale_late = PhaseAccumulator::mean(phases.late_sum, phases.late_n);
  return m;
}

}  // namespace arscale
