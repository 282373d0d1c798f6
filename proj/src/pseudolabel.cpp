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

#include "c2f/pseudolabel.hpp"

#include "c2f/coarsify.hpp"

namespace c2f {

void TtaConfig::validate() const {
  if (flips.empty() || scales.empty()) throw UsageError("tta: flips and scales must be non-empty");
  for (double s : scales) {
    if (!(s > 0.0)) throw UsageError("tta: scales must be positive");
  }
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0)) {
    throw UsageError("tta.confidence_threshold must be in (0, 1)");
  }
}

LabelMask argmax_labels(const Tensor& scores) {
  const std::size_t classes = scores.dim(0), h = scores.dim(1), w = scores.dim(2);
  const std::size_t plane = h * w;
  LabelMask out(static_cast<int>(h), static_cast<int>(w), 0);
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (scores[c * plane + p] > scores[best * plane + p]) best = c;
    }
    out.labels[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

TtaPrediction tta_predict(const LogitsFn& model, const Tensor& image, const TtaConfig& cfg) {
  cfg.validate();
  const std::size_t h = image.dim(1), w = image.dim(2);
  TtaPrediction out;
  Tensor total;
  for (bool flip : cfg.flips) {
    const Tensor oriented = flip ? hflip(image) : image;
    for (double s : cfg.scales) {
      const Tensor logits = model(bilinear_resize(oriented, s));
      if (!logits.all_finite()) throw NumericalError("tta_predict: non-finite model output");
      Tensor scores = cfg.combine == TtaCombine::kMeanProb ? softmax(logits) : logits;
      scores = bilinear_resize(scores, h, w);
      if (flip) scores = hflip(scores);
      out.argmax_stack.push_back(argmax_labels(scores));
      if (total.empty()) {
        total = std::move(scores);
      } else {
        for (std::size_t i = 0; i < total.numel(); ++i) total[i] += scores[i];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(cfg.combinations());
  for (double& v : total.values()) v *= inv;
  out.prob_avg = cfg.combine == TtaCombine::kMeanProb ? std::move(total) : softmax(total);
  return out;
}

TtaPrediction tta_predict(const ModelState& model, const Tensor& image, const TtaConfig& cfg) {
  return tta_predict([&model](const Tensor& x) { return predict_logits(model, x); }, image, cfg);
}

LabelMask fuse(const Tensor& prob_avg, const std::vector<LabelMask>& argmax_stack,
               const TtaConfig& cfg) {
  const std::size_t classes = prob_avg.dim(0), h = prob_avg.dim(1), w = prob_avg.dim(2);
  const std::size_t plane = h * w;
  for (const LabelMask& m : argmax_stack) {
    if (m.size() != plane) throw ShapeError("fuse: argmax map does not match probabilities");
  }
  LabelMask out(static_cast<int>(h), static_cast<int>(w), kIgnore);
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (prob_avg[c * plane + p] > prob_avg[best * plane + p]) best = c;
    }
    const bool agree = std::all_of(argmax_stack.begin(), argmax_stack.end(), [&](const LabelMask& m) {
      return m.labels[p] == argmax_stack.front().labels[p];
    });
    if (agree && prob_avg[best * plane + p] > cfg.confidence_threshold) {
      out.labels[p] = static_cast<std::uint8_t>(best);
    }
  }
  out.provenance.resize(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    out.provenance[p] = out.labels[p] == kIgnore ? Provenance::kIgnore : Provenance::kPseudo;
  }
  return out;
}

PseudoLabelResult pseudo_label(const ModelState& model, const Tensor& image, const TtaConfig& cfg) {
  TtaPrediction pred = tta_predict(model, image, cfg);
  PseudoLabelResult out;
  out.label = fuse(pred.prob_avg, pred.argmax_stack, cfg);
  out.accepted_fraction = labeled_fraction(out.label);
  out.argmax_stack = std::move(pred.argmax_stack);
  return out;
}

LabelMask merge(const LabelMask& coarse, const LabelMask& pseudo) {
  if (!coarse.has_provenance()) throw DataError("merge: coarse mask has no provenance flags");
  if (coarse.height != pseudo.height || coarse.width != pseudo.width) {
    throw ShapeError("merge: coarse and pseudo masks differ in size");
  }
  LabelMask out = coarse;
  for (std::size_t p = 0; p < out.size(); ++p) {
    if (coarse.provenance[p] == Provenance::kManual || pseudo.labels[p] == kIgnore) continue;
    out.labels[p] = pseudo.labels[p];
    out.provenance[p] = Provenance::kPseudo;
  }
  return out;
}

}  // namespace c2f
