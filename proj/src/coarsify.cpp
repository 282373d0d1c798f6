/* Copyright 2026 The c2f Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "c2f/coarsify.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace c2f {

void CoarsePolicy::validate() const {
  if (!(target_labeled_fraction > 0.0 && target_labeled_fraction <= 1.0)) {
    throw UsageError("coarse.target_labeled_fraction must be in (0, 1]");
  }
  if (min_component_area < 0) throw UsageError("coarse.min_component_area must be >= 0");
  if (max_erosion_iters < 0) throw UsageError("coarse.max_erosion_iters must be >= 0");
}

double labeled_fraction(const LabelMask& label) {
  if (label.labels.empty()) return 0.0;
  const auto labelled = std::count_if(label.labels.begin(), label.labels.end(),
                                      [](std::uint8_t v) { return v != kIgnore; });
  return static_cast<double>(labelled) / static_cast<double>(label.labels.size());
}

LabelMask erode_labels(const LabelMask& dense, int iterations, int min_area) {
  const int h = dense.height, w = dense.width;
  LabelMask cur = dense;
  cur.provenance.clear();
  std::vector<std::uint8_t> next(cur.labels.size());
  for (int it = 0; it < iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::uint8_t v = cur.at(y, x);
        bool keep = v != kIgnore;
        if (keep) {
          keep = y > 0 && y < h - 1 && x > 0 && x < w - 1 && cur.at(y - 1, x) == v &&
                 cur.at(y + 1, x) == v && cur.at(y, x - 1) == v && cur.at(y, x + 1) == v;
        }
        next[static_cast<std::size_t>(y) * w + x] = keep ? v : kIgnore;
      }
    }
    cur.labels.swap(next);
  }

  if (min_area > 0) {
    std::vector<int> component(cur.labels.size(), -1);
    std::vector<std::size_t> stack, members;
    int id = 0;
    for (std::size_t start = 0; start < cur.labels.size(); ++start) {
      if (cur.labels[start] == kIgnore || component[start] >= 0) continue;
      const std::uint8_t v = cur.labels[start];
      members.clear();
      stack.assign(1, start);
      component[start] = id;
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        members.push_back(p);
        const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
          if (component[q] < 0 && cur.labels[q] == v) {
            component[q] = id;
            stack.push_back(q);
          }
        }
      }
      if (members.size() < static_cast<std::size_t>(min_area)) {
        for (std::size_t p : members) cur.labels[p] = kIgnore;
      }
      ++id;
    }
  }
  cur.mark_manual();
  return cur;
}

LabelMask coarsify(const LabelMask& dense, const CoarsePolicy& policy) {
  policy.validate();
  if (dense.has_ignore()) throw DataError("coarsify: input label already contains IGNORE");
  // The labelled fraction is non-increasing in the erosion count, so the
  // first count reaching the target can be found by bisection. Erosion is
  // quantised, so the count just before it is taken when that lands closer.
  const double target = policy.target_labeled_fraction;
  auto fraction_at = [&](int n) {
    return labeled_fraction(erode_labels(dense, n, policy.min_component_area));
  };
  int lo = 0, hi = policy.max_erosion_iters;
  if (fraction_at(hi) > target) return erode_labels(dense, hi, policy.min_component_area);
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (fraction_at(mid) <= target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  if (lo > 0 && fraction_at(lo - 1) - target < target - fraction_at(lo)) --lo;
  return erode_labels(dense, lo, policy.min_component_area);
}

}  // namespace c2f
