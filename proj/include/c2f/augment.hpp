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

// Cross-domain augmentation: class regions cut from a synthetic scene are
// pasted onto a real scene. A paste mask value of 1 marks a synthetic pixel.

#ifndef C2F_AUGMENT_HPP_
#define C2F_AUGMENT_HPP_

#include <cstdint>
#include <vector>

#include "c2f/common.hpp"

namespace c2f {

struct AugmentConfig {
  double p_select_real = 0.5;
  double p_class = 0.5;

  void validate() const;
};

/// H x W grid of 0/1.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  bool all(std::uint8_t v) const;
  BinaryMask inverted() const;
};

/// Includes each class present in `synthetic_label` independently with
/// probability p_class (classes visited in ascending id order).
BinaryMask build_paste_mask(const LabelMask& synthetic_label, const AugmentConfig& cfg, Rng& rng);

/// Per pixel: the synthetic (image, label, provenance) where mask is 1, the
/// real one elsewhere. The result keeps the real item's id/domain, suffixed
/// "+aug", and is flagged augmented.
Sample mix(const Sample& real, const Sample& synthetic, const BinaryMask& mask);

/// Center-crops / pads `synthetic` to height x width. Padded pixels are
/// IGNORE and never selected by build_paste_mask.
Sample fit_to(const Sample& synthetic, int height, int width);

/// Appends one augmented twin for each real, non-augmented item selected with
/// probability p_select_real. Partners are drawn uniformly from the whole pool.
std::vector<Sample> augment_batch(const std::vector<Sample>& batch, const SceneDataset& synthetic_pool,
                                  const AugmentConfig& cfg, Rng& rng);

}  // namespace c2f

#endif  // C2F_AUGMENT_HPP_
