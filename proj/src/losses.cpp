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

#include "c2f/losses.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace c2f {

void LossConfig::validate() const {
  if (!(boundary_threshold > 0.0)) throw UsageError("loss.boundary_threshold must be > 0");
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda_bd < 0.0) {
    throw UsageError("loss lambdas must be >= 0");
  }
  if (!(gumbel_temperature > 0.0)) throw UsageError("loss.gumbel_temperature must be > 0");
}

Var cross_entropy(Var logits, const LabelMask& target) {
  const Tensor& z = logits.value();
  if (z.rank() != 3) throw ShapeError("cross_entropy: logits must be [C,H,W]");
  const std::size_t classes = z.dim(0), plane = z.dim(1) * z.dim(2);
  if (static_cast<std::size_t>(target.height) != z.dim(1) ||
      static_cast<std::size_t>(target.width) != z.dim(2)) {
    throw ShapeError("cross_entropy: target " + std::to_string(target.height) + "x" +
                     std::to_string(target.width) + " vs logits " + shape_string(z.shape()));
  }
  std::size_t labelled = 0;
  for (std::uint8_t t : target.labels) {
    if (t == kIgnore) continue;
    if (t >= classes) {
      throw std::invalid_argument("cross_entropy: class id " + std::to_string(t) +
                                  " >= class count " + std::to_string(classes));
    }
    ++labelled;
  }
  auto probs = std::make_shared<Tensor>(softmax(z));
  double loss = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    const std::uint8_t t = target.labels[p];
    if (t == kIgnore) continue;
    // log-softmax computed from the logits directly for accuracy.
    double peak = z[p];
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, z[c * plane + p]);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(z[c * plane + p] - peak);
    loss -= z[t * plane + p] - peak - std::log(total);
  }
  const double inv = labelled ? 1.0 / static_cast<double>(labelled) : 0.0;
  loss *= inv;
  auto labels = std::make_shared<std::vector<std::uint8_t>>(target.labels);
  return logits.tape()->record(
      Tensor({1}, loss), {logits},
      [logits, probs, labels, inv, classes, plane](Tape& t, const Tensor& g) {
        if (inv == 0.0) return;
        Tensor& gz = t.grad_buffer(logits);
        const double scale = g[0] * inv;
        for (std::size_t p = 0; p < plane; ++p) {
          const std::uint8_t label = (*labels)[p];
          if (label == kIgnore) continue;
          for (std::size_t c = 0; c < classes; ++c) {
            const double indicator = c == label ? 1.0 : 0.0;
            gz[c * plane + p] += scale * ((*probs)[c * plane + p] - indicator);
          }
        }
      });
}

Tensor one_hot(const LabelMask& target, std::size_t num_classes) {
  Tensor out({num_classes, static_cast<std::size_t>(target.height),
              static_cast<std::size_t>(target.width)});
  const std::size_t plane = target.size();
  for (std::size_t p = 0; p < plane; ++p) {
    const std::uint8_t t = target.labels[p];
    if (t == kIgnore) throw std::invalid_argument("one_hot: IGNORE pixel in dense mask");
    if (t >= num_classes) throw std::invalid_argument("one_hot: class id out of range");
    out[t * plane + p] = 1.0;
  }
  return out;
}

Var boundary_discrepancy(Var predicted, const Tensor& reference, double threshold, double w_ref,
                         double w_pred) {
  const Tensor& pred = predicted.value();
  if (pred.shape() != reference.shape()) {
    throw ShapeError("boundary_discrepancy: " + shape_string(pred.shape()) + " vs " +
                     shape_string(reference.shape()));
  }
  const std::size_t n = pred.numel();
  std::size_t ref_count = 0, pred_count = 0;
  double ref_sum = 0.0, pred_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = std::abs(pred[i] - reference[i]);
    if (reference[i] > threshold) {
      ++ref_count;
      ref_sum += diff;
    }
    if (pred[i] > threshold) {
      ++pred_count;
      pred_sum += diff;
    }
  }
  const double ref_w = ref_count ? w_ref / static_cast<double>(ref_count) : 0.0;
  const double pred_w = pred_count ? w_pred / static_cast<double>(pred_count) : 0.0;
  const double loss = ref_w * ref_sum + pred_w * pred_sum;

  auto ref = std::make_shared<Tensor>(reference);
  auto pred_saved = std::make_shared<Tensor>(pred);
  return predicted.tape()->record(
      Tensor({1}, loss), {predicted},
      [predicted, ref, pred_saved, threshold, ref_w, pred_w](Tape& t, const Tensor& g) {
        Tensor& gp = t.grad_buffer(predicted);
        const Tensor& r = *ref;
        const Tensor& p = *pred_saved;
        for (std::size_t i = 0; i < p.numel(); ++i) {
          const double d = p[i] - r[i];
          const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          double w = 0.0;
          if (r[i] > threshold) w += ref_w;
          if (p[i] > threshold) w += pred_w;
          gp[i] += g[0] * w * sign;
        }
      });
}

Var boundary_loss(Var logits, const LabelMask& target, const LossConfig& cfg, const Tensor& noise) {
  const Tensor& z = logits.value();
  if (z.rank() != 3) throw ShapeError("boundary_loss: logits must be [C,H,W]");
  if (target.has_ignore()) {
    throw std::invalid_argument("boundary_loss: target contains IGNORE (dense labels required)");
  }
  const Tensor gt_boundary = spatial_gradient_norm(one_hot(target, z.dim(0)));
  Var soft = gumbel_softmax(logits, cfg.gumbel_temperature, noise);
  Var pred_boundary = spatial_gradient_norm(soft);
  return boundary_discrepancy(pred_boundary, gt_boundary, cfg.boundary_threshold, cfg.lambda1,
                              cfg.lambda2);
}

LossBreakdown total_loss(const std::vector<LossItem>& batch, const LossConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("total_loss: empty batch");
  Var ce_sum;
  Var bd_sum;
  std::size_t bd_items = 0;
  LossBreakdown out;
  for (const LossItem& item : batch) {
    if (item.label == nullptr) throw std::invalid_argument("total_loss: item without label");
    Var ce = cross_entropy(item.logits, *item.label);
    ce_sum = ce_sum.valid() ? add(ce_sum, ce) : ce;
    if (item.domain == Domain::kSynthetic && !item.augmented && cfg.lambda_bd != 0.0) {
      if (item.noise == nullptr) throw std::invalid_argument("total_loss: synthetic item without noise");
      Var bd = boundary_loss(item.logits, *item.label, cfg, *item.noise);
      bd_sum = bd_sum.valid() ? add(bd_sum, bd) : bd;
      ++bd_items;
    }
  }
  Var total = scale(ce_sum, 1.0 / static_cast<double>(batch.size()));
  out.cross_entropy = total.value()[0];
  if (bd_items > 0) {
    Var bd_mean = scale(bd_sum, 1.0 / static_cast<double>(bd_items));
    out.boundary = bd_mean.value()[0];
    total = add(total, scale(bd_mean, cfg.lambda_bd));
  }
  out.total = total;
  return out;
}

}  // namespace c2f
