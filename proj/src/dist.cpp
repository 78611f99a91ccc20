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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace arscale {
namespace {

// Accumulates in ascending value order. Fixing the order makes every
// reduction bit-identical under permutation of vocabulary indices.
double sum_sorted(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += t;
  return acc;
}

}  // namespace

LogitVector::LogitVector(Eigen::ArrayXd values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw std::invalid_argument("LogitVector: vocabulary size must be >= 2");
  }
  if (!values_.isFinite().all()) {
    throw std::invalid_argument("LogitVector: non-finite logit");
  }
}

ProbVector::ProbVector(Eigen::ArrayXd probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw std::invalid_argument("ProbVector: vocabulary size must be >= 2");
  }
  if (!probs_.isFinite().all() || (probs_ < 0.0).any()) {
    throw std::invalid_argument("ProbVector: entries must be finite and >= 0");
  }
  if (std::abs(probs_.sum() - 1.0) > kProbSumTolerance) {
    throw std::invalid_argument("ProbVector: entries must sum to 1");
  }
}

ProbVector softmax(const LogitVector& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("softmax: temperature must be positive");
  }
  const Eigen::ArrayXd scaled = logits.values() / temperature;
  Eigen::ArrayXd exps = (scaled - scaled.maxCoeff()).exp();
  exps /= exps.sum();
  return ProbVector(std::move(exps));
}

Eigen::ArrayXd floor_and_renormalize(const Eigen::ArrayXd& probs) {
  Eigen::ArrayXd floored = probs.max(kProbFloor);
  // Canonical-order normalization sum, same reason as sum_sorted.
  std::vector<double> terms(floored.data(), floored.data() + floored.size());
  floored /= sum_sorted(terms);
  return floored;
}

double entropy(const ProbVector& p) {
  const Eigen::ArrayXd& probs = p.probs();
  std::vector<double> terms(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    terms[static_cast<std::size_t>(i)] =
        probs[i] > 0.0 ? -probs[i] * std::log(probs[i]) : 0.0;
  }
  return std::max(0.0, sum_sorted(terms));
}

double normalized_entropy(const ProbVector& p) {
  return entropy(p) / std::log(static_cast<double>(p.size()));
}

double top2_margin(const ProbVector& p) {
  double first = -1.0;
  double second = -1.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = p[i];
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

double kl_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  }
  const Eigen::ArrayXd ps = floor_and_renormalize(p.probs());
  const Eigen::ArrayXd qs = floor_and_renormalize(q.probs());
  std::vector<double> terms(static_cast<std::size_t>(ps.size()));
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    terms[static_cast<std::size_t>(i)] = ps[i] * std::log(ps[i] / qs[i]);
  }
  // Gibbs' inequality holds exactly after smoothing; clamp the few ulps
  // the summation may lose when p and q are nearly identical.
  return std::max(0.0, sum_sorted(terms));
}

double topk_log_confidence(const ProbVector& p, std::int64_t k) {
  if (k < 1 || k > p.size()) {
    throw std::invalid_argument("topk_log_confidence: k out of range");
  }
  const Eigen::ArrayXd ps = floor_and_renormalize(p.probs());
  std::vector<double> sorted(ps.data(), ps.data() + ps.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double acc = 0.0;
  for (std::int64_t j = k - 1; j >= 0; --j) {
    acc += -std::log(sorted[static_cast<std::size_t>(j)]);
  }
  return acc / static_cast<double>(k);
}

LogitVector cfg_combine(const LogitVector& cond, const LogitVector& uncond,
                        double scale) {
  if (cond.size() != uncond.size()) {
    throw std::invalid_argument("cfg_combine: dimension mismatch");
  }
  if (!std::isfinite(scale)) {
    throw std::invalid_argument("cfg_combine: scale must be finite");
  }
  // Algebraically uncond + scale * (cond - uncond); this form reproduces
  // cond exactly at scale = 1 and uncond exactly at scale = 0.
  return LogitVector((1.0 - scale) * uncond.values() + scale * cond.values());
}

}  // namespace arscale
