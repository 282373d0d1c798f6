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

// Coarse-annotation simulation by per-class erosion.

#ifndef C2F_COARSIFY_HPP_
#define C2F_COARSIFY_HPP_

#include "c2f/common.hpp"

namespace c2f {

struct CoarsePolicy {
  double target_labeled_fraction = 0.63;
  int min_component_area = 16;
  int max_erosion_iters = 8;

  void validate() const;
};

/// (#non-IGNORE pixels) / (H * W).
double labeled_fraction(const LabelMask& label);

/// Erodes every class region `iterations` times with a 3x3 cross (pixels
/// outside the image count as foreign), then drops 4-connected components
/// smaller than `min_area` to IGNORE.
LabelMask erode_labels(const LabelMask& dense, int iterations, int min_area);

/// Finds the smallest erosion count whose labelled fraction is <= the target
/// (or max_erosion_iters if none is) and keeps it unless one fewer iteration
/// lands strictly closer to the target. Output pixels are either IGNORE or the
/// input class, with manual/ignore provenance.
LabelMask coarsify(const LabelMask& dense, const CoarsePolicy& policy);

}  // namespace c2f

#endif  // C2F_COARSIFY_HPP_
