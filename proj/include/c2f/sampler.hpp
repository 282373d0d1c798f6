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

// Choosing which pool images to annotate next.
//
// Images are referred to by their position in the pool dataset; ties always
// resolve to the lowest position.

#ifndef C2F_SAMPLER_HPP_
#define C2F_SAMPLER_HPP_

#include <cstddef>
#include <vector>

#include "c2f/common.hpp"
#include "c2f/model.hpp"

namespace c2f {

/// presence[i][c]: predicted pixels of class c in pool image i.
using ClassPresence = std::vector<std::vector<double>>;

struct SamplerState {
  std::vector<std::size_t> chosen;  // in selection order
  std::vector<std::size_t> pool;    // ascending
  ClassPresence presence;           // indexed by pool position

  /// All `count` images unlabelled, nothing chosen.
  static SamplerState fresh(std::size_t count);
  /// Sum of presence[i][c] over chosen images.
  std::vector<double> coverage() const;
};

/// Single-scale argmax prediction per image, counted per class.
ClassPresence estimate_distribution(const ModelState& model, const SceneDataset& pool);

/// Presence from the dataset's own labels (IGNORE not counted).
ClassPresence label_distribution(const SceneDataset& pool);

/// 0/1 presence derived from pixel counts.
ClassPresence binarize(const ClassPresence& presence);

/// Coverage-balanced round robin: each round visits classes in ascending
/// order of current coverage and takes, for each, the unchosen image with the
/// largest presence of that class.
std::vector<std::size_t> select_next(SamplerState& state, std::size_t k);

/// Uniform draw without replacement.
std::vector<std::size_t> uniform_select(SamplerState& state, std::size_t k, Rng& rng);

}  // namespace c2f

#endif  // C2F_SAMPLER_HPP_
