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

// Pseudo-labelling of IGNORE regions by test-time-augmentation consistency.

#ifndef C2F_PSEUDOLABEL_HPP_
#define C2F_PSEUDOLABEL_HPP_

#include <functional>
#include <vector>

#include "c2f/common.hpp"
#include "c2f/model.hpp"

namespace c2f {

enum class TtaCombine : std::uint8_t { kMeanProb, kMeanLogit };

struct TtaConfig {
  std::vector<bool> flips{false, true};
  std::vector<double> scales{0.5, 1.0, 2.0};
  double confidence_threshold = 0.9;
  TtaCombine combine = TtaCombine::kMeanProb;

  std::size_t combinations() const { return flips.size() * scales.size(); }
  void validate() const;
};

/// Maps a [3,H,W] image to [C,H,W] logits.
using LogitsFn = std::function<Tensor(const Tensor&)>;

struct TtaPrediction {
  Tensor prob_avg;                      // [C,H,W]
  std::vector<LabelMask> argmax_stack;  // one per (flip, scale) combination
};

struct PseudoLabelResult {
  LabelMask label;  // IGNORE where rejected; provenance pseudo / ignore
  double accepted_fraction = 0.0;
  std::vector<LabelMask> argmax_stack;
};

/// Per-pixel argmax over the class axis (lowest class wins ties).
LabelMask argmax_labels(const Tensor& scores);

/// Runs every (flip, scale) combination, maps the class scores back onto the
/// input grid (bilinear resize, then un-flip) and averages them. With
/// kMeanLogit the logits are averaged and softmax applied afterwards.
TtaPrediction tta_predict(const LogitsFn& model, const Tensor& image, const TtaConfig& cfg);
TtaPrediction tta_predict(const ModelState& model, const Tensor& image, const TtaConfig& cfg);

/// Accepts argmax(prob_avg) at pixels where every argmax map agrees and the
/// top averaged probability is strictly above the threshold.
LabelMask fuse(const Tensor& prob_avg, const std::vector<LabelMask>& argmax_stack,
               const TtaConfig& cfg);

PseudoLabelResult pseudo_label(const ModelState& model, const Tensor& image, const TtaConfig& cfg);

/// Manual pixels of `coarse` are kept. Every other pixel takes `pseudo` where
/// it is labelled, replacing any earlier pseudo label; where `pseudo` is
/// IGNORE the earlier value stays, so the labelled fraction never decreases.
/// Throws DataError if `coarse` has no provenance.
LabelMask merge(const LabelMask& coarse, const LabelMask& pseudo);

}  // namespace c2f

#endif  // C2F_PSEUDOLABEL_HPP_
