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

// Procedural toy street scenes.
//
// A scene is a background (class 0) with a handful of shapes painted
// back-to-front; the label of a pixel is the class of the topmost shape.
// Shape classes follow a long-tailed distribution. Both domains share the
// geometry distribution; the "real" domain differs only photometrically.

#ifndef C2F_DATAGEN_HPP_
#define C2F_DATAGEN_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "c2f/common.hpp"

namespace c2f {

enum class ShapeKind : std::uint8_t { kRectangle, kDisk, kTriangle, kBar };

enum class SceneDomain : std::uint8_t { kSynthetic, kReal };

struct SceneSpec {
  int height = 64;
  int width = 64;
  int num_classes = 8;
  /// Per-class shape kind, indexed by class id (entry 0 unused). Empty selects
  /// the default vocabulary: rectangles for class 1, alternating disks and
  /// triangles after that, thin vertical bars for the last two classes.
  std::vector<ShapeKind> shapes;
  /// Per-class draw weights, indexed by class id (entry 0 unused). Empty
  /// selects decay^(c-1).
  std::vector<double> class_weights;
  double decay = 0.5;
  int min_shapes = 5;
  int max_shapes = 9;
  /// Extent ranges as fractions of the image side.
  std::array<double, 2> rect_extent{0.15, 0.5};
  std::array<double, 2> disk_radius{0.07, 0.16};
  std::array<double, 2> triangle_extent{0.15, 0.4};
  std::array<double, 2> bar_length{0.35, 0.75};
  std::array<int, 2> bar_width{2, 3};

  double texture_sigma = 0.03;     // per-pixel texture noise, both domains
  double texture_amplitude = 0.08; // class-specific stripe pattern
  double color_jitter = 0.05;      // per-shape color offset
  double domain_shift = 1.0;       // scales the real-domain appearance shift
  double real_noise_sigma = 0.05;
  double real_hue_jitter = 0.06;
  /// When set, geometry depends on (seed, index) only, so both domains share labels.
  bool paired = false;
  std::uint64_t seed = 1;

  void validate() const;
  ShapeKind shape_of(int cls) const;
  /// Normalised draw weights over classes 1..C-1 (index 0 is 0).
  std::vector<double> weights() const;
};

/// Deterministic in (spec, domain, index). Real scenes carry Domain::kRealFine
/// (dense labels); all labels are marked manual.
Sample generate_scene(const SceneSpec& spec, SceneDomain domain, std::uint64_t index);

/// Scenes first_index .. first_index+n-1 with ids "<domain>/<index>".
SceneDataset generate_pool(const SceneSpec& spec, int n, SceneDomain domain,
                           std::uint64_t first_index = 0);

/// Per-class pixel counts over a dataset's labels (IGNORE not counted).
std::vector<std::uint64_t> class_histogram(const SceneDataset& data);

}  // namespace c2f

#endif  // C2F_DATAGEN_HPP_
