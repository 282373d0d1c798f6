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

#include "c2f/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "c2f/pseudolabel.hpp"

namespace c2f {
namespace {

void check_k(const SamplerState& state, std::size_t k) {
  if (k > state.pool.size()) {
    throw std::invalid_argument("sampler: asked for " + std::to_string(k) + " images, only " +
                                std::to_string(state.pool.size()) + " left in the pool");
  }
}

void take(SamplerState& state, std::size_t image) {
  state.pool.erase(std::find(state.pool.begin(), state.pool.end(), image));
  state.chosen.push_back(image);
}

}  // namespace

SamplerState SamplerState::fresh(std::size_t count) {
  SamplerState state;
  state.pool.resize(count);
  std::iota(state.pool.begin(), state.pool.end(), std::size_t{0});
  return state;
}

std::vector<double> SamplerState::coverage() const {
  const std::size_t classes = presence.empty() ? 0 : presence.front().size();
  std::vector<double> cov(classes, 0.0);
  for (std::size_t i : chosen) {
    for (std::size_t c = 0; c < classes; ++c) cov[c] += presence.at(i)[c];
  }
  return cov;
}

ClassPresence estimate_distribution(const ModelState& model, const SceneDataset& pool) {
  if (pool.items.empty()) throw std::invalid_argument("estimate_distribution: empty pool");
  ClassPresence out;
  out.reserve(pool.items.size());
  for (const Sample& s : pool.items) {
    const LabelMask pred = argmax_labels(predict_logits(model, s.image));
    std::vector<double> counts(static_cast<std::size_t>(model.arch.num_classes), 0.0);
    for (std::uint8_t l : pred.labels) counts[l] += 1.0;
    out.push_back(std::move(counts));
  }
  return out;
}

ClassPresence label_distribution(const SceneDataset& pool) {
  ClassPresence out;
  for (const Sample& s : pool.items) {
    std::vector<double> counts(static_cast<std::size_t>(pool.num_classes), 0.0);
    for (std::uint8_t l : s.label.labels) {
      if (l != kIgnore) counts.at(l) += 1.0;
    }
    out.push_back(std::move(counts));
  }
  return out;
}

ClassPresence binarize(const ClassPresence& presence) {
  ClassPresence out = presence;
  for (auto& row : out) {
    for (double& v : row) v = v > 0.0 ? 1.0 : 0.0;
  }
  return out;
}

std::vector<std::size_t> select_next(SamplerState& state, std::size_t k) {
  check_k(state, k);
  if (!state.pool.empty() && state.presence.empty()) {
    throw std::invalid_argument("select_next: class presence not estimated");
  }
  std::vector<std::size_t> picked;
  const std::size_t classes = state.presence.empty() ? 0 : state.presence.front().size();
  std::vector<double> cov = state.coverage();
  while (picked.size() < k) {
    std::vector<std::size_t> order(classes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cov[a] < cov[b]; });
    bool progressed = false;
    for (std::size_t c : order) {
      if (picked.size() == k) break;
      // Pool is ascending, so strict > keeps the lowest index on ties.
      std::size_t best = state.pool.size();
      double best_value = 0.0;
      for (std::size_t j = 0; j < state.pool.size(); ++j) {
        const double v = state.presence.at(state.pool[j])[c];
        if (v > best_value) {
          best_value = v;
          best = j;
        }
      }
      if (best == state.pool.size()) continue;  // class absent from the remaining pool
      const std::size_t image = state.pool[best];
      take(state, image);
      picked.push_back(image);
      for (std::size_t cc = 0; cc < classes; ++cc) cov[cc] += state.presence[image][cc];
      progressed = true;
    }
    if (!progressed) {
      // Nothing in the pool shows any class: fall back to the lowest positions.
      const std::size_t image = state.pool.front();
      take(state, image);
      picked.push_back(image);
    }
  }
  return picked;
}

std::vector<std::size_t> uniform_select(SamplerState& state, std::size_t k, Rng& rng) {
  check_k(state, k);
  std::vector<std::size_t> picked;
  for (std::size_t n = 0; n < k; ++n) {
    std::uniform_int_distribution<std::size_t> pick(0, state.pool.size() - 1);
    const std::size_t image = state.pool[pick(rng)];
    take(state, image);
    picked.push_back(image);
  }
  return picked;
}

}  // namespace c2f
