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

#ifndef C2F_LOSSES_HPP_
#define C2F_LOSSES_HPP_

#include <vector>

#include "c2f/common.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

struct LossConfig {
  double lambda1 = 0.5;  // weight of the term over ground-truth boundary pixels
  double lambda2 = 0.5;  // weight of the term over predicted boundary pixels
  double boundary_threshold = 1e-8;
  double lambda_bd = 1.0;
  double gumbel_temperature = 1.0;

  void validate() const;
};

/// Mean over non-IGNORE pixels of -log softmax(logits)[target]. A target with
/// no labelled pixel yields 0 and a zero gradient.
Var cross_entropy(Var logits, const LabelMask& target);

/// One-hot [C,H,W] encoding of a dense mask.
Tensor one_hot(const LabelMask& target, std::size_t num_classes);

/// Masked L1 between two boundary maps, averaged separately over the pixels
/// where `reference` > threshold and where `predicted` > threshold. The pixel
/// sets are fixed at evaluation time; gradient flows to `predicted` only.
Var boundary_discrepancy(Var predicted, const Tensor& reference, double threshold, double w_ref,
                         double w_pred);

/// Boundary loss on a dense target: gradient-magnitude maps of the
/// Gumbel-softmax prediction and of the one-hot target compared on their
/// thresholded boundary pixels.
Var boundary_loss(Var logits, const LabelMask& target, const LossConfig& cfg, const Tensor& noise);

struct LossItem {
  Var logits;
  const LabelMask* label = nullptr;
  Domain domain = Domain::kSynthetic;
  bool augmented = false;
  /// Gumbel noise; only read for pure synthetic items.
  const Tensor* noise = nullptr;
};

struct LossBreakdown {
  Var total;
  double cross_entropy = 0.0;  // mean over items
  double boundary = 0.0;       // mean over synthetic items (0 if none)
};

/// mean CE over all items + lambda_bd * mean boundary loss over pure
/// synthetic items. Augmented items contribute CE only.
LossBreakdown total_loss(const std::vector<LossItem>& batch, const LossConfig& cfg);

}  // namespace c2f

#endif  // C2F_LOSSES_HPP_
