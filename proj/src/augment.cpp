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

#include "c2f/augment.hpp"

#include <algorithm>
#include <array>

namespace c2f {
namespace {

Provenance provenance_at(const LabelMask& m, std::size_t p) {
  if (m.has_provenance()) return m.provenance[p];
  return m.labels[p] == kIgnore ? Provenance::kIgnore : Provenance::kManual;
}

}  // namespace

void AugmentConfig::validate() const {
  if (p_select_real < 0.0 || p_select_real > 1.0 || p_class < 0.0 || p_class > 1.0) {
    throw UsageError("augment probabilities must lie in [0, 1]");
  }
}

bool BinaryMask::all(std::uint8_t v) const {
  return std::all_of(bits.begin(), bits.end(), [v](std::uint8_t b) { return b == v; });
}

BinaryMask BinaryMask::inverted() const {
  BinaryMask out = *this;
  for (auto& b : out.bits) b = b ? 0 : 1;
  return out;
}

BinaryMask build_paste_mask(const LabelMask& synthetic_label, const AugmentConfig& cfg, Rng& rng) {
  std::array<bool, 256> present{};
  for (std::uint8_t l : synthetic_label.labels) present[l] = true;
  std::array<bool, 256> chosen{};
  std::bernoulli_distribution include(cfg.p_class);
  for (int c = 0; c < 255; ++c) {
    if (present[c]) chosen[c] = include(rng);
  }
  BinaryMask mask{synthetic_label.height, synthetic_label.width,
                  std::vector<std::uint8_t>(synthetic_label.size(), 0)};
  for (std::size_t p = 0; p < synthetic_label.size(); ++p) {
    const std::uint8_t l = synthetic_label.labels[p];
    mask.bits[p] = l != kIgnore && chosen[l] ? 1 : 0;
  }
  return mask;
}

Sample mix(const Sample& real, const Sample& synthetic, const BinaryMask& mask) {
  const int h = real.label.height, w = real.label.width;
  if (synthetic.label.height != h || synthetic.label.width != w || mask.height != h ||
      mask.width != w) {
    throw ShapeError("mix: real, synthetic and mask extents differ");
  }
  Sample out = real;
  out.id = real.id + "+aug";
  out.augmented = true;
  out.label.mark_manual();
  if (real.label.has_provenance()) out.label.provenance = real.label.provenance;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t channels = real.image.dim(0);
  for (std::size_t p = 0; p < plane; ++p) {
    if (!mask.bits[p]) continue;
    out.label.labels[p] = synthetic.label.labels[p];
    out.label.provenance[p] = provenance_at(synthetic.label, p);
    for (std::size_t c = 0; c < channels; ++c) out.image[c * plane + p] = synthetic.image[c * plane + p];
  }
  return out;
}

Sample fit_to(const Sample& synthetic, int height, int width) {
  const int sh = synthetic.label.height, sw = synthetic.label.width;
  if (sh == height && sw == width) return synthetic;
  Sample out = synthetic;
  const std::size_t channels = synthetic.image.dim(0);
  out.image = Tensor({channels, static_cast<std::size_t>(height), static_cast<std::size_t>(width)});
  out.label = LabelMask(height, width, kIgnore);
  const int dy = (sh - height) / 2, dx = (sw - width) / 2;
  for (int y = 0; y < height; ++y) {
    const int sy = y + dy;
    if (sy < 0 || sy >= sh) continue;
    for (int x = 0; x < width; ++x) {
      const int sx = x + dx;
      if (sx < 0 || sx >= sw) continue;
      out.label.at(y, x) = synthetic.label.at(sy, sx);
      for (std::size_t c = 0; c < channels; ++c) out.image.at(c, y, x) = synthetic.image.at(c, sy, sx);
    }
  }
  out.label.mark_manual();
  return out;
}

std::vector<Sample> augment_batch(const std::vector<Sample>& batch, const SceneDataset& synthetic_pool,
                                  const AugmentConfig& cfg, Rng& rng) {
  if (synthetic_pool.items.empty()) throw std::invalid_argument("augment_batch: empty synthetic pool");
  cfg.validate();
  std::vector<Sample> out = batch;
  std::bernoulli_distribution select(cfg.p_select_real);
  std::uniform_int_distribution<std::size_t> partner(0, synthetic_pool.items.size() - 1);
  for (const Sample& item : batch) {
    if (item.domain == Domain::kSynthetic || item.augmented) continue;
    if (!select(rng)) continue;
    const Sample synthetic =
        fit_to(synthetic_pool.items[partner(rng)], item.label.height, item.label.width);
    const BinaryMask mask = build_paste_mask(synthetic.label, cfg, rng);
    out.push_back(mix(item, synthetic, mask));
  }
  return out;
}

}  // namespace c2f
