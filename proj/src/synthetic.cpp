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

#include "arscale/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arscale {
namespace {

constexpr double kMinTarget = 1e-6;
constexpr double kMaxTarget = 1.0;

// Normalized entropy of (1 - m) * onehot + m * uniform, closed form:
// only two distinct probability values exist.
double family_h_norm(double m, std::int64_t v) {
  const double vd = static_cast<double>(v);
  const double tail = m / vd;
  const double dom = 1.0 - m + tail;
  double h = 0.0;
  if (dom > 0.0) h -= dom * std::log(dom);
  if (tail > 0.0) h -= (vd - 1.0) * tail * std::log(tail);
  return h / std::log(vd);
}

}  // namespace

void ScenarioSpec::validate() const {
  if (vocab_size < 2) {
    throw std::invalid_argument("ScenarioSpec: vocab_size must be >= 2");
  }
  if (grid_h < 1 || grid_w < 1) {
    throw std::invalid_argument("ScenarioSpec: grid must be nonempty");
  }
  if (!(concentration > 0.0)) {
    throw std::invalid_argument("ScenarioSpec: concentration must be > 0");
  }
  if (entropy_jitter < 0.0 || entropy_jitter >= 1.0) {
    throw std::invalid_argument("ScenarioSpec: entropy_jitter must be in [0,1)");
  }
  if (uncond_gap < 0.0) {
    throw std::invalid_argument("ScenarioSpec: uncond_gap must be >= 0");
  }
  if (kind == ScenarioKind::kInstabilityPocket) {
    if (onset < 1 || duration < 1 || onset + duration > total_steps()) {
      throw std::invalid_argument(
          "ScenarioSpec: pocket requires onset >= 1 and onset + duration <= T");
    }
    if (!(entropy_level > 0.0 && entropy_level <= 1.0)) {
      throw std::invalid_argument(
          "ScenarioSpec: entropy_level must be in (0,1]");
    }
    if (block_size < 1) {
      throw std::invalid_argument("ScenarioSpec: block_size must be >= 1");
    }
  }
  if (kind == ScenarioKind::kSemanticFade) {
    if (fade_start < 1 || fade_start > total_steps()) {
      throw std::invalid_argument("ScenarioSpec: fade_start must be in [1,T]");
    }
    if (!(fade_rate > 0.0 && fade_rate <= 1.0)) {
      throw std::invalid_argument("ScenarioSpec: fade_rate must be in (0,1]");
    }
  }
  if (!(s_base_ref > 0.0)) {
    throw std::invalid_argument("ScenarioSpec: s_base_ref must be > 0");
  }
}

ProbVector peaked_distribution(std::int64_t vocab_size, double target_h_norm,
                               std::int64_t dominant) {
  if (vocab_size < 2) {
    throw std::invalid_argument("peaked_distribution: vocab_size must be >= 2");
  }
  if (dominant < 0 || dominant >= vocab_size) {
    throw std::invalid_argument("peaked_distribution: dominant out of range");
  }
  const double target = std::clamp(target_h_norm, kMinTarget, kMaxTarget);

  // family_h_norm is monotone in the mix weight, 0 at m = 0, 1 at m = 1.
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 64; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (family_h_norm(mid, vocab_size) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double m = 0.5 * (lo + hi);
  const double tail = m / static_cast<double>(vocab_size);
  Eigen::ArrayXd probs = Eigen::ArrayXd::Constant(vocab_size, tail);
  probs[dominant] = 1.0 - m + tail;
  return ProbVector(std::move(probs));
}

SyntheticSource::SyntheticSource(TrajectoryId id, ScenarioSpec spec)
    : id_(id), spec_(std::move(spec)), rng_(spec_.seed) {
  spec_.validate();
}

double SyntheticSource::uniform01() {
  // 53-bit mantissa draw; identical across platforms for a given seed.
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

bool SyntheticSource::pocket_hits(std::int64_t t, GridPos pos) const {
  if (spec_.kind != ScenarioKind::kInstabilityPocket) return false;
  if (t < spec_.onset || t >= spec_.onset + spec_.duration) return false;
  if (spec_.affected_blocks.empty()) return true;
  const int blocks_x = (spec_.grid_w + spec_.block_size - 1) / spec_.block_size;
  const int block =
      (pos.row / spec_.block_size) * blocks_x + pos.col / spec_.block_size;
  return std::find(spec_.affected_blocks.begin(), spec_.affected_blocks.end(),
                   block) != spec_.affected_blocks.end();
}

StepObservation SyntheticSource::next(double cfg_scale) {
  if (step_ >= spec_.total_steps()) {
    throw std::invalid_argument("SyntheticSource: stream exhausted");
  }
  const std::int64_t t = ++step_;
  const GridPos pos{static_cast<int>((t - 1) / spec_.grid_w),
                    static_cast<int>((t - 1) % spec_.grid_w)};

  const auto dominant =
      static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(spec_.vocab_size));
  const double cond_jitter =
      1.0 + spec_.entropy_jitter * (2.0 * uniform01() - 1.0);
  const double uncond_jitter =
      1.0 + spec_.entropy_jitter * (2.0 * uniform01() - 1.0);

  const double healthy = 1.0 / (1.0 + spec_.concentration);
  double cond_target = healthy * cond_jitter;
  if (pocket_hits(t, pos)) {
    cond_target = spec_.entropy_level * cond_jitter;
  }
  const double uncond_target =
      std::min(healthy * uncond_jitter + spec_.uncond_gap, 0.97);

  Eigen::ArrayXd cond =
      peaked_distribution(spec_.vocab_size, cond_target, dominant).probs();
  Eigen::ArrayXd uncond =
      peaked_distribution(spec_.vocab_size, uncond_target, dominant).probs();

  if (spec_.kind == ScenarioKind::kSemanticFade && t >= spec_.fade_start) {
    const double w = std::min(
        1.0, spec_.fade_rate * static_cast<double>(t - spec_.fade_start + 1));
    // Lerp form reproduces uncond exactly at full mixing.
    cond = (1.0 - w) * cond + w * uncond;
  }

  // Guidance coupling: scale above s_base_ref sharpens the conditional.
  const double power = std::max(cfg_scale / spec_.s_base_ref, 1e-6);
  if (power != 1.0) {
    cond = cond.pow(power);
    cond /= cond.sum();
  }

  // Inverse-CDF draw of the sampled token.
  const double u = uniform01();
  std::int64_t token = spec_.vocab_size - 1;
  double cum = 0.0;
  for (std::int64_t i = 0; i < spec_.vocab_size; ++i) {
    cum += cond[i];
    if (u < cum) {
      token = i;
      break;
    }
  }

  return StepObservation{id_,
                         t,
                         ProbVector(std::move(cond)),
                         ProbVector(std::move(uncond)),
                         pos,
                         token};
}

std::vector<SyntheticSource> make_cohort(
    const std::vector<ScenarioSpec>& specs) {
  if (specs.empty()) {
    throw std::invalid_argument("make_cohort: cohort must be nonempty");
  }
  const ScenarioSpec& first = specs.front();
  std::vector<SyntheticSource> sources;
  sources.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ScenarioSpec& s = specs[i];
    if (s.vocab_size != first.vocab_size || s.grid_h != first.grid_h ||
        s.grid_w != first.grid_w) {
      throw std::invalid_argument(
          "make_cohort: specs disagree on vocabulary or grid shape");
    }
    sources.emplace_back(static_cast<TrajectoryId>(i), s);
  }
  return sources;
}

}  // namespace arscale
