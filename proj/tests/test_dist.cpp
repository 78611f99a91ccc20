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

#include "arscale/dist.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"

using namespace arscale;

namespace {

Eigen::ArrayXd arr(std::initializer_list<double> vals) {
  Eigen::ArrayXd a(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double v : vals) a[i++] = v;
  return a;
}

ProbVector pv(std::initializer_list<double> vals) {
  return ProbVector(arr(vals));
}

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

}  // namespace

TEST_SUITE("dist") {

TEST_CASE("validation rejects malformed inputs") {
  CHECK_THROWS_AS(ProbVector(arr({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(ProbVector(arr({0.7, 0.4})), std::invalid_argument);
  CHECK_THROWS_AS(ProbVector(arr({-0.1, 1.1})), std::invalid_argument);
  CHECK_THROWS_AS(LogitVector(arr({1.0})), std::invalid_argument);
  Eigen::ArrayXd bad = arr({0.0, 0.0});
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(LogitVector{bad}, std::invalid_argument);
}

TEST_CASE("softmax basics") {
  const ProbVector flat = softmax(LogitVector(arr({0, 0, 0, 0})), 1.0);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(flat[i] == doctest::Approx(0.25));

  const ProbVector dom = softmax(LogitVector(arr({50, 0})), 1.0);
  CHECK(dom[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(dom[1] == doctest::Approx(0.0).epsilon(1e-9));

  const ProbVector two = softmax(LogitVector(arr({1, 0})), 1.0);
  CHECK(two[0] == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(two[1] == doctest::Approx(0.268941).epsilon(1e-6));

  CHECK_THROWS_AS(softmax(LogitVector(arr({1, 0})), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(softmax(LogitVector(arr({1, 0})), -1.0), std::invalid_argument);
}

TEST_CASE("softmax stays valid for huge logits") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> big(-1e4, 1e4);
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::ArrayXd logits(16);
    for (Eigen::Index i = 0; i < 16; ++i) logits[i] = big(rng);
    const ProbVector p = softmax(LogitVector(logits), 1.0);  // validates
    CHECK(p.probs().sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Extreme corner: all mass collapses onto one index without overflow.
  const ProbVector corner = softmax(LogitVector(arr({1e4, -1e4, 0.0})), 1.0);
  CHECK(corner[0] == doctest::Approx(1.0));
}

TEST_CASE("softmax temperature equals logit scaling") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::ArrayXd logits(12);
    for (Eigen::Index i = 0; i < 12; ++i) logits[i] = noise(rng);
    const double temp = 0.25 + 3.0 * std::uniform_real_distribution<double>()(rng);
    const ProbVector a = softmax(LogitVector(logits), temp);
    const ProbVector b = softmax(LogitVector(logits / temp), 1.0);
    for (Eigen::Index i = 0; i < 12; ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("entropy basics") {
  CHECK(entropy(uniform(8)) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(entropy(one_hot(5, 2)) == 0.0);
  CHECK(entropy(pv({0.5, 0.25, 0.25})) == doctest::Approx(1.039721).epsilon(1e-6));
}

TEST_CASE("normalized entropy basics") {
  CHECK(normalized_entropy(uniform(3)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normalized_entropy(uniform(100)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normalized_entropy(one_hot(7, 0)) == 0.0);
  CHECK(normalized_entropy(pv({0.5, 0.5, 0.0, 0.0})) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("top2 margin basics") {
  CHECK(top2_margin(pv({1.0, 0.0, 0.0})) == doctest::Approx(1.0));
  CHECK(top2_margin(uniform(4)) == doctest::Approx(0.0));
  CHECK(top2_margin(pv({0.6, 0.3, 0.1})) == doctest::Approx(0.3).epsilon(1e-12));
  // Ties: only values matter.
  CHECK(top2_margin(pv({0.4, 0.4, 0.2})) == doctest::Approx(0.0));
}

TEST_CASE("kl divergence basics") {
  const ProbVector p = pv({0.2, 0.5, 0.3});
  CHECK(kl_divergence(p, p) == 0.0);

  // Single-term collapse: one-hot against q with mass 0.5 at the hot index.
  CHECK(kl_divergence(one_hot(2, 0), pv({0.5, 0.5})) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));

  CHECK(kl_divergence(pv({0.75, 0.25}), pv({0.5, 0.5})) ==
        doctest::Approx(0.130812).epsilon(1e-6));

  CHECK_THROWS_AS(kl_divergence(pv({0.5, 0.5}), uniform(3)),
                  std::invalid_argument);
}

TEST_CASE("kl is nonnegative and zero only at equality") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t v = 2 + rng() % 64;
    const auto p = oracle::random_distribution(rng, v, 2.0);
    const auto q = oracle::random_distribution(rng, v, 2.0);
    const double d = kl_divergence(from_vec(p), from_vec(q));
    CHECK(d >= 0.0);
    CHECK(d == doctest::Approx(oracle::kl(p, q)).epsilon(1e-12));
  }
}

TEST_CASE("topk log confidence basics") {
  // one-hot, k=1: the floor smoothing leaves -log(max) a hair above 0.
  CHECK(topk_log_confidence(one_hot(8, 3), 1) ==
        doctest::Approx(0.0).epsilon(1e-8));
  CHECK(topk_log_confidence(uniform(4), 2) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK(topk_log_confidence(pv({0.5, 0.3, 0.2}), 2) ==
        doctest::Approx(0.948560).epsilon(1e-6));
  CHECK_THROWS_AS(topk_log_confidence(uniform(4), 0), std::invalid_argument);
  CHECK_THROWS_AS(topk_log_confidence(uniform(4), 5), std::invalid_argument);
}

TEST_CASE("topk with k=1 equals -log max") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const auto p = oracle::random_distribution(rng, 2 + rng() % 40, 1.5);
    const Eigen::ArrayXd smoothed = floor_and_renormalize(from_vec(p).probs());
    CHECK(topk_log_confidence(from_vec(p), 1) ==
          doctest::Approx(-std::log(smoothed.maxCoeff())).epsilon(1e-12));
  }
}

TEST_CASE("cfg combine") {
  const LogitVector cond(arr({2, 0}));
  const LogitVector uncond(arr({1, 0}));

  const LogitVector same = cfg_combine(cond, uncond, 1.0);
  CHECK(same.values()[0] == cond.values()[0]);
  CHECK(same.values()[1] == cond.values()[1]);

  const LogitVector base = cfg_combine(cond, uncond, 0.0);
  CHECK(base.values()[0] == uncond.values()[0]);

  const LogitVector pushed = cfg_combine(cond, uncond, 3.0);
  CHECK(pushed.values()[0] == doctest::Approx(4.0));
  CHECK(pushed.values()[1] == doctest::Approx(0.0));

  CHECK_THROWS_AS(cfg_combine(cond, LogitVector(arr({1, 0, 0})), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(cfg_combine(cond, uncond,
                              std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
}

TEST_CASE("statistics are bit-identical under index permutation") {
  std::mt19937_64 rng(47);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t v = 3 + rng() % 200;
    auto p = oracle::random_distribution(rng, v, 2.5);
    auto q = oracle::random_distribution(rng, v, 2.5);

    std::vector<std::size_t> perm(v);
    for (std::size_t i = 0; i < v; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp(v);
    std::vector<double> qp(v);
    for (std::size_t i = 0; i < v; ++i) {
      pp[perm[i]] = p[i];
      qp[perm[i]] = q[i];
    }

    CHECK(entropy(from_vec(p)) == entropy(from_vec(pp)));
    CHECK(normalized_entropy(from_vec(p)) == normalized_entropy(from_vec(pp)));
    CHECK(top2_margin(from_vec(p)) == top2_margin(from_vec(pp)));
    CHECK(kl_divergence(from_vec(p), from_vec(q)) ==
          kl_divergence(from_vec(pp), from_vec(qp)));
    CHECK(topk_log_confidence(from_vec(p), 3) ==
          topk_log_confidence(from_vec(pp), 3));
  }
}

TEST_CASE("entropy bounds hold on random distributions") {
  std::mt19937_64 rng(53);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t v = 2 + rng() % 512;
    const auto p = oracle::random_distribution(rng, v, 4.0);
    const double h = entropy(from_vec(p));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(v)) + 1e-12);
    const double hn = normalized_entropy(from_vec(p));
    CHECK(hn >= 0.0);
    CHECK(hn <= 1.0 + 1e-12);
  }
}

}  // TEST_SUITE
