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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace arscale {

/// Fixed-capacity ring buffer of doubles with window statistics.
///
/// Queries recompute directly from the buffered values instead of keeping
/// running sums, so the streaming results are exactly the full-window
/// recomputation (no incremental drift over long streams). Windows here
/// are at most a few thousand entries, so the O(window) query cost is
/// irrelevant next to the per-step distribution work.
class RollingWindow {
 public:
  explicit RollingWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
      throw std::invalid_argument("RollingWindow: capacity must be >= 1");
    }
    values_.reserve(capacity);
  }

  void push(double x) {
    if (values_.size() < capacity_) {
      values_.push_back(x);
    } else {
      values_[head_] = x;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t capacity() const { return capacity_; }

  double mean() const {
    require_nonempty();
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
  }

  /// Population variance (divide by n); 0 for a single element.
  double variance() const {
    require_nonempty();
    const double m = mean();
    double s = 0.0;
    for (double v : values_) s += (v - m) * (v - m);
    return s / static_cast<double>(values_.size());
  }

  /// Population standard deviation.
  double stddev() const { return std::sqrt(variance()); }

  double min() const {
    require_nonempty();
    return *std::min_element(values_.begin(), values_.end());
  }

  double max() const {
    require_nonempty();
    return *std::max_element(values_.begin(), values_.end());
  }

  /// Window contents, unordered (ring layout).
  const std::vector<double>& values() const { return values_; }

  void clear() {
    values_.clear();
    head_ = 0;
  }

 private:
  void require_nonempty() const {
    if (values_.empty()) {
      throw std::logic_error("RollingWindow: empty window");
    }
  }

  std::size_t capacity_;
  std::size_t head_ = 0;  // overwrite position once full
  std::vector<double> values_;
};

}  // namespace arscale
