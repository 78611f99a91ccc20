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

#include "arscale/profile.hpp"

#include <doctest.h>

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "oracles.hpp"

using namespace arscale;

namespace {

ProbVector from_vec(const std::vector<double>& vals) {
  Eigen::ArrayXd a(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) {
    a[static_cast<Eigen::Index>(i)] = vals[i];
  }
  return ProbVector(std::move(a));
}

ProbVector uniform(Eigen::Index v) {
  return ProbVector(Eigen::ArrayXd::Constant(v, 1.0 / static_cast<double>(v)));
}

ProbVector one_hot(Eigen::Index v, Eigen::Index at) {
  Eigen::ArrayXd a = Eigen::ArrayXd::Zero(v);
  a[at] = 1.0;
  return ProbVector(std::move(a));
}

GridPos raster(std::int64_t t, int grid_w) {
  return {static_cast<int>((t - 1) / grid_w), static_cast<int>((t - 1) % grid_w)};
}

// Brute-force worst-block statistic over an explicit partial grid.
double oracle_worst_block(const std::vector<std::vector<std::optional<double>>>& grid,
                          const ProfileConfig& cfg) {
  const int h = static_cast<int>(grid.size());
  const int w = static_cast<int>(grid[0].size());
  const int b = cfg.block_size;
  const int by = (h + b - 1) / b;
  const int bx = (w + b - 1) / b;

  struct Block {
    double mean;
    int index;
  };
  std::vector<Block> eligible;
  double all_sum = 0.0;
  int all_n = 0;
  for (int i = 0; i < by; ++i) {
    for (int j = 0; j < bx; ++j) {
      double sum = 0.0;
      int n = 0;
      int cells = 0;
      for (int r = i * b; r < std::min(h, (i + 1) * b); ++r) {
        for (int c = j * b; c < std::min(w, (j + 1) * b); ++c) {
          ++cells;
          const auto& cell =
              grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
          if (cell) {
            sum += *cell;
            ++n;
          }
        }
      }
      all_sum += sum;
      all_n += n;
      if (n == 0) continue;
      const bool ok = cfg.rho_min_is_count ? n >= cfg.rho_min
                                           : n >= cfg.rho_min * cells;
      if (ok) eligible.push_back({sum / n, i * bx + j});
    }
  }
  if (eligible.empty()) return all_sum / all_n;
  std::sort(eligible.begin(), eligible.end(),
            [](const Block& a, const Block& b2) {
              if (a.mean != b2.mean) return a.mean > b2.mean;
              return a.index < b2.index;
            });
  auto take = static_cast<std::size_t>(
      std::ceil(cfg.q_worst * static_cast<double>(eligible.size())));
  take = std::clamp<std::size_t>(take, 1, eligible.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < take; ++i) acc += eligible[i].mean;
  return acc / static_cast<double>(take);
}

}  // namespace

TEST_SUITE("profile") {

TEST_CASE("config validation") {
  ProfileConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha_h = 0.7;  // 0.7 + 0.5 != 1
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ProfileConfig{};
  cfg.lambda_tok = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ProfileConfig{};
  cfg.minmax_window = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ProfileConfig{};
  cfg.q_worst = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ProfileConfig{};
  cfg.rho_min = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.rho_min_is_count = true;  // the table's "4" reading
  cfg.rho_min = 4;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("token confidence endpoints and composition") {
  ProfileConfig cfg;
  CHECK(token_confidence(one_hot(16, 5), cfg) == doctest::Approx(1.0));
  CHECK(token_confidence(uniform(16), cfg) == doctest::Approx(0.0));

  // Independent composition through the oracle entropy and margin.
  const std::vector<double> p = {0.6, 0.3, 0.1};
  const double h_norm = oracle::normalized_entropy(p);
  const double margin = oracle::top2_margin(p);
  const double expect = 1.0 - (0.5 * h_norm + 0.5 * (1.0 - margin));
  CHECK(token_confidence(from_vec(p), cfg) ==
        doctest::Approx(expect).epsilon(1e-12));

  ProfileConfig bad;
  bad.alpha_h = 0.9;
  CHECK_THROWS_AS(token_confidence(uniform(4), bad), std::invalid_argument);
}

TEST_CASE("ema update") {
  CHECK(update_ema(0.5, 1.0, 0.2) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(update_ema(0.37, 0.37, 0.3) == doctest::Approx(0.37));
  CHECK(update_ema(0.9, 0.1, 1.0) == 0.1);
  CHECK_THROWS_AS(update_ema(0.5, 0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(update_ema(0.5, 0.5, 1.5), std::invalid_argument);
}

TEST_CASE("worst block: four quadrants, worst decile") {
  ProfileConfig cfg;  // block_size 4, q 0.1, rho_min 0.5
  IntrinsicState state(8, 8, cfg);
  // Means per 4x4 block: 0.2 / 0.4 / 0.6 / 0.8.
  const auto block_value = [](GridPos pos) {
    const int block = (pos.row / 4) * 2 + pos.col / 4;
    return 0.2 * (block + 1);
  };
  double last = 0.0;
  for (std::int64_t t = 1; t <= 64; ++t) {
    const GridPos pos = raster(t, 8);
    last = record_and_worst_block(state, pos, block_value(pos), cfg);
  }
  // ceil(0.1 * 4) = 1 worst block out of four.
  CHECK(last == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("worst block: constant field and degenerate fill") {
  ProfileConfig cfg;
  IntrinsicState state(8, 8, cfg);
  for (std::int64_t t = 1; t <= 64; ++t) {
    const double e = record_and_worst_block(state, raster(t, 8), 0.37, cfg);
    CHECK(e == doctest::Approx(0.37));
  }

  ProfileConfig strict;
  strict.rho_min = 1.0;
  IntrinsicState s2(8, 8, strict);
  // One filled cell: no block is fully filled, falls back to the mean of
  // all filled entries, i.e. the single value.
  CHECK(record_and_worst_block(s2, {0, 0}, 0.9, strict) == doctest::Approx(0.9));
}

TEST_CASE("worst block rejects bad positions") {
  ProfileConfig cfg;
  IntrinsicState state(4, 4, cfg);
  CHECK_THROWS_AS(record_and_worst_block(state, {4, 0}, 0.5, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(record_and_worst_block(state, {0, -1}, 0.5, cfg),
                  std::invalid_argument);
  record_and_worst_block(state, {0, 0}, 0.5, cfg);
  CHECK_THROWS_AS(record_and_worst_block(state, {0, 0}, 0.5, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(record_and_worst_block(state, {0, 1}, 1.5, cfg),
                  std::invalid_argument);
}

TEST_CASE("worst block matches brute force on random partial fills") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 6; ++rep) {
    ProfileConfig cfg;
    cfg.block_size = 1 + static_cast<int>(rng() % 5);
    cfg.q_worst = 0.05 + 0.9 * u(rng);
    if (rep % 2 == 0) {
      cfg.rho_min = 0.25 + 0.75 * u(rng);
    } else {
      cfg.rho_min_is_count = true;
      cfg.rho_min = 1 + static_cast<double>(rng() % 4);
    }
    const int h = 2 + static_cast<int>(rng() % 9);
    const int w = 2 + static_cast<int>(rng() % 9);
    IntrinsicState state(h, w, cfg);
    std::vector<std::vector<std::optional<double>>> grid(
        static_cast<std::size_t>(h),
        std::vector<std::optional<double>>(static_cast<std::size_t>(w)));
    for (std::int64_t t = 1; t <= static_cast<std::int64_t>(h) * w; ++t) {
      const GridPos pos = raster(t, w);
      const double val = u(rng);
      grid[static_cast<std::size_t>(pos.row)][static_cast<std::size_t>(pos.col)] =
          val;
      const double got = record_and_worst_block(state, pos, val, cfg);
      const double want = oracle_worst_block(grid, cfg);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("worst block scaling leaves selection unchanged") {
  // Scaling every entropy by a constant scales E_worst proportionally.
  ProfileConfig cfg;
  cfg.block_size = 2;
  const double scale = 0.35;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  IntrinsicState a(6, 6, cfg);
  IntrinsicState b(6, 6, cfg);
  for (std::int64_t t = 1; t <= 36; ++t) {
    const GridPos pos = raster(t, 6);
    const double val = u(rng);
    const double ea = record_and_worst_block(a, pos, val, cfg);
    const double eb = record_and_worst_block(b, pos, val * scale, cfg);
    CHECK(eb == doctest::Approx(ea * scale).epsilon(1e-12));
  }
}

TEST_CASE("block stability min-max normalization") {
  ProfileConfig cfg;
  {
    IntrinsicState s(4, 4, cfg);
    block_stability(s, 0.2, cfg);
    CHECK(block_stability(s, 0.8, cfg) == doctest::Approx(0.0));  // window max
  }
  {
    IntrinsicState s(4, 4, cfg);
    block_stability(s, 0.8, cfg);
    CHECK(block_stability(s, 0.2, cfg) == doctest::Approx(1.0));  // window min
  }
  {
    IntrinsicState s(4, 4, cfg);
    block_stability(s, 0.2, cfg);
    block_stability(s, 0.8, cfg);
    CHECK(block_stability(s, 0.5, cfg) == doctest::Approx(0.5).epsilon(1e-12));
  }
  {
    // Flat window: neutral stability.
    IntrinsicState s(4, 4, cfg);
    CHECK(block_stability(s, 0.4, cfg) == doctest::Approx(0.5));
    CHECK(block_stability(s, 0.4, cfg) == doctest::Approx(0.5));
  }
}

TEST_CASE("intrinsic score blending and seeding") {
  ProfileConfig cfg;  // w_tok 0.65, w_blk 0.35, lambda_i 0.2
  {
    IntrinsicState s(4, 4, cfg);
    CHECK(intrinsic_score(s, 1.0, 1.0, cfg) == doctest::Approx(1.0));
  }
  {
    IntrinsicState s(4, 4, cfg);
    // First sample seeds both EMAs, so I_1 = I_raw = 0.65*0.8 + 0.35*0.4.
    CHECK(intrinsic_score(s, 0.8, 0.4, cfg) ==
          doctest::Approx(0.66).epsilon(1e-12));
  }
  {
    // Constant inputs keep I_t pinned at I_raw (seeded EMA fixed point).
    IntrinsicState s(4, 4, cfg);
    double last = 0.0;
    for (int t = 0; t < 50; ++t) last = intrinsic_score(s, 0.8, 0.4, cfg);
    CHECK(std::abs(last - 0.66) < 1e-6);
  }
  {
    // Step change decays geometrically; independent recurrence oracle.
    IntrinsicState s(4, 4, cfg);
    intrinsic_score(s, 0.2, 0.3, cfg);
    double ema_tok = 0.2;
    double ema_i = 0.65 * 0.2 + 0.35 * 0.3;
    for (int t = 2; t <= 50; ++t) {
      const double got = intrinsic_score(s, 0.9, 0.5, cfg);
      ema_tok = 0.8 * ema_tok + 0.2 * 0.9;
      const double i_raw = 0.65 * ema_tok + 0.35 * 0.5;
      ema_i = 0.8 * ema_i + 0.2 * i_raw;
      CHECK(got == doctest::Approx(ema_i).epsilon(1e-12));
    }
    // After the transient the score sits at the new fixed point.
    CHECK(std::abs(*s.ema_i() - (0.65 * 0.9 + 0.35 * 0.5)) < 1e-3);
  }
}

TEST_CASE("conditional utilization z-score mapping") {
  ProfileConfig cfg;  // z_max 3
  {
    // First sample is its own window mean.
    ConditionalState s(cfg);
    CHECK(conditional_utilization(s, 0.7, cfg) == doctest::Approx(0.5));
  }
  {
    // K equal to the window mean after the push: {0.1, 0.3, 0.2}.
    ConditionalState s(cfg);
    conditional_utilization(s, 0.1, cfg);
    conditional_utilization(s, 0.3, cfg);
    CHECK(conditional_utilization(s, 0.2, cfg) == doctest::Approx(0.5));
  }
  {
    // Clip saturation on both sides.
    ConditionalState s(cfg);
    for (int i = 0; i < 10; ++i) conditional_utilization(s, 0.1, cfg);
    CHECK(conditional_utilization(s, 50.0, cfg) == doctest::Approx(1.0));
    ConditionalState s2(cfg);
    for (int i = 0; i < 10; ++i) conditional_utilization(s2, 5.0, cfg);
    CHECK(conditional_utilization(s2, 0.0, cfg) == doctest::Approx(0.0));
  }
  {
    // Window {0.1, 0.2, 0.3} with K = 0.3 against the statistics oracle.
    ConditionalState s(cfg);
    conditional_utilization(s, 0.1, cfg);
    conditional_utilization(s, 0.2, cfg);
    const double got = conditional_utilization(s, 0.3, cfg);
    const std::vector<double> win = {0.1, 0.2, 0.3};
    const double z =
        (0.3 - oracle::mean(win)) / (oracle::pop_std(win) + cfg.epsilon);
    const double want = 0.5 + 0.5 * std::clamp(z, -3.0, 3.0) / 3.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
  ConditionalState s(cfg);
  CHECK_THROWS_AS(conditional_utilization(s, -0.1, cfg), std::invalid_argument);
}

TEST_CASE("rolling z-score equals brute-force recomputation on long streams") {
  ProfileConfig cfg;
  cfg.zscore_window = 48;
  ConditionalState state(cfg);
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> stream;
  for (std::size_t t = 0; t < 5000; ++t) {
    const double k = u(rng);
    stream.push_back(k);
    const double got = conditional_utilization(state, k, cfg);
    const auto win = oracle::window_slice(stream, t, cfg.zscore_window);
    const double z =
        (k - oracle::mean(win)) / (oracle::pop_std(win) + cfg.epsilon);
    const double want =
        0.5 + 0.5 * std::clamp(z, -cfg.z_max, cfg.z_max) / cfg.z_max;
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("unified confidence, running min, rebound") {
  ProfileConfig cfg;  // w_i 0.75, w_d 0.25
  {
    ConfidenceState s(4, 4, cfg);
    const auto u = unified_confidence(s, 0.8, 0.4, cfg);
    CHECK(u.confidence == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(u.running_min == doctest::Approx(0.7));
    CHECK(u.rebound == 0.0);  // C == C_min at the minimum
  }
  {
    ConfidenceState s(4, 4, cfg);
    unified_confidence(s, 0.4, 0.4, cfg);               // C_min = 0.40
    const auto u = unified_confidence(s, 0.5, 0.5, cfg);  // C = 0.50
    CHECK(u.running_min == doctest::Approx(0.4));
    CHECK(u.rebound == doctest::Approx(0.25).epsilon(1e-6));
  }
  {
    // Affine-sigmoid calibration squashes through sigmoid(a * (C - c)).
    ProfileConfig cal = cfg;
    cal.calibration = CalibrationKind::kAffineSigmoid;
    cal.calibration_a = 2.0;
    cal.calibration_c = 0.5;
    ConfidenceState s(4, 4, cal);
    const auto u = unified_confidence(s, 0.8, 0.4, cal);
    CHECK(u.confidence ==
          doctest::Approx(1.0 / (1.0 + std::exp(-2.0 * 0.2))).epsilon(1e-12));
  }
}

TEST_CASE("with fixed utilization, confidence is monotone in intrinsic") {
  ProfileConfig cfg;
  double prev = -1.0;
  for (double i = 0.0; i <= 1.0; i += 0.125) {
    ConfidenceState s(4, 4, cfg);
    const double c = unified_confidence(s, i, 0.55, cfg).confidence;
    CHECK(c > prev);
    prev = c;
  }
}

TEST_CASE("full pipeline stays in range and keeps min/rebound invariants") {
  ProfileConfig cfg;
  cfg.minmax_window = 16;
  cfg.zscore_window = 16;
  std::mt19937_64 rng(4242);
  for (int rep = 0; rep < 3; ++rep) {
    ConfidenceState state(6, 6, cfg);
    double min_seen = 1e300;
    for (std::int64_t t = 1; t <= 36; ++t) {
      const auto cond = oracle::random_distribution(rng, 40, 1.0 + rep);
      const auto uncond = oracle::random_distribution(rng, 40, 0.5);
      const auto r = profile_step(state, from_vec(cond), from_vec(uncond),
                                  raster(t, 6), cfg);
      for (double x : {r.s_tok, r.s_tok_ema, r.b_stability, r.intrinsic,
                       r.d_raw, r.d_hat, r.confidence, r.h_norm}) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
      }
      CHECK(r.rebound >= 0.0);
      min_seen = std::min(min_seen, r.confidence);
      CHECK(r.running_min == min_seen);  // non-increasing running minimum
      if (r.confidence == r.running_min) CHECK(r.rebound == 0.0);
      CHECK(state.history().size() == static_cast<std::size_t>(t));
    }
  }
}

TEST_CASE("profile trace is bit-identical under vocabulary permutation") {
  ProfileConfig cfg;
  cfg.minmax_window = 8;
  cfg.zscore_window = 8;
  std::mt19937_64 rng(31337);
  ConfidenceState plain(4, 4, cfg);
  ConfidenceState permuted(4, 4, cfg);
  for (std::int64_t t = 1; t <= 16; ++t) {
    const std::size_t v = 24;
    const auto cond = oracle::random_distribution(rng, v, 2.0);
    const auto uncond = oracle::random_distribution(rng, v, 1.0);
    std::vector<std::size_t> perm(v);
    for (std::size_t i = 0; i < v; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> cond_p(v);
    std::vector<double> uncond_p(v);
    for (std::size_t i = 0; i < v; ++i) {
      cond_p[perm[i]] = cond[i];
      uncond_p[perm[i]] = uncond[i];
    }
    const auto a =
        profile_step(plain, from_vec(cond), from_vec(uncond), raster(t, 4), cfg);
    const auto b = profile_step(permuted, from_vec(cond_p), from_vec(uncond_p),
                                raster(t, 4), cfg);
    CHECK(a.h_norm == b.h_norm);
    CHECK(a.margin == b.margin);
    CHECK(a.s_tok == b.s_tok);
    CHECK(a.e_worst == b.e_worst);
    CHECK(a.b_stability == b.b_stability);
    CHECK(a.intrinsic == b.intrinsic);
    CHECK(a.kl == b.kl);
    CHECK(a.d_raw == b.d_raw);
    CHECK(a.d_hat == b.d_hat);
    CHECK(a.confidence == b.confidence);
    CHECK(a.running_min == b.running_min);
    CHECK(a.rebound == b.rebound);
  }
}

}  // TEST_SUITE
