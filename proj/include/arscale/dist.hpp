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

#include <Eigen/Core>

#include <cstdint>

namespace arscale {

/// Conventions used by every function in this header:
///   - natural logarithm throughout,
///   - before any log or ratio is taken, probabilities are floored at
///     kProbFloor and renormalized (keeps KL and log-confidence finite
///     when a vocabulary entry carries zero mass),
///   - reductions over vocabulary entries sum in value-sorted order, so
///     every statistic is bit-identical under index permutation.
inline constexpr double kProbFloor = 1e-12;

/// Tolerance on |sum(p) - 1| accepted by ProbVector.
inline constexpr double kProbSumTolerance = 1e-9;

/// Raw scores over a vocabulary, length V >= 2, all entries finite.
class LogitVector {
 public:
  explicit LogitVector(Eigen::ArrayXd values);

  const Eigen::ArrayXd& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  Eigen::ArrayXd values_;
};

/// A categorical distribution over a vocabulary, length V >= 2,
/// entries nonnegative and summing to 1 within kProbSumTolerance.
class ProbVector {
 public:
  explicit ProbVector(Eigen::ArrayXd probs);

  const Eigen::ArrayXd& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_[i]; }

 private:
  Eigen::ArrayXd probs_;
};

/// Temperature softmax with max-subtraction; stable for logits of any
/// magnitude. temperature must be > 0.
ProbVector softmax(const LogitVector& logits, double temperature = 1.0);

/// Shannon entropy in nats, 0*log 0 treated as 0. Range [0, ln V].
double entropy(const ProbVector& p);

/// entropy(p) / ln V, in [0, 1]. Uniform -> 1, one-hot -> 0.
double normalized_entropy(const ProbVector& p);

/// Difference between the two largest probabilities, in [0, 1].
/// Ties are resolved by value alone, so the result is permutation-proof.
double top2_margin(const ProbVector& p);

/// KL(p || q) in nats after floor smoothing of both arguments.
/// Nonnegative; exactly 0 when p == q. Throws on dimension mismatch.
double kl_divergence(const ProbVector& p, const ProbVector& q);

/// -(1/k) * sum of log of the k largest probabilities (after floor
/// smoothing). For k = 1 this is -log(max prob). Requires 1 <= k <= V.
double topk_log_confidence(const ProbVector& p, std::int64_t k);

/// Classifier-free guidance combination: uncond + scale * (cond - uncond).
/// scale = 1 returns cond, scale = 0 returns uncond.
LogitVector cfg_combine(const LogitVector& cond, const LogitVector& uncond,
                        double scale);

/// Floor every entry at kProbFloor and renormalize. Exposed so callers
/// can reproduce the exact smoothing the log-based statistics apply.
Eigen::ArrayXd floor_and_renormalize(const Eigen::ArrayXd& probs);

}  // namespace arscale
