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

// A small encoder-decoder segmentation network.
//
// Encoder: one 3x3 conv per stage, stride 1 for the first stage and stride 2
// after that, each followed by ReLU. Decoder: at every level the coarser map is
// bilinearly upsampled, concatenated with the encoder skip, and mixed by a conv
// + ReLU. A final 1x1 conv produces per-class logits at input resolution.

#ifndef C2F_MODEL_HPP_
#define C2F_MODEL_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

struct ArchConfig {
  int in_channels = 3;
  int num_classes = 8;
  std::vector<int> channels{16, 32, 64};
  int decoder_kernel = 1;
  bool zero_init_head = false;

  /// Spatial reduction of the deepest stage (input extents must divide it).
  int downsample() const { return 1 << (static_cast<int>(channels.size()) - 1); }
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct ModelState {
  ArchConfig arch;
  std::vector<Tensor> params;    // (weight, bias) per layer
  std::vector<Tensor> momentum;  // same shapes as params

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// He-style scaled normal init (std = sqrt(2 / fan_in)), zero biases.
ModelState init_model(const ArchConfig& arch, std::uint64_t seed);

/// Records the forward pass on `tape`. An empty `params` receives one Var per
/// entry of model.params; a filled one is reused, so several forward passes on
/// one tape share (and accumulate into) the same parameter gradients.
/// Inputs whose extents are not multiples of arch.downsample() are
/// reflect-padded and the logits cropped back.
Var forward(Tape& tape, const ModelState& model, Var image, std::vector<Var>& params);

/// Inference-only forward: [3,H,W] -> [C,H,W] logits.
Tensor predict_logits(const ModelState& model, const Tensor& image);

/// v <- momentum * v + g + weight_decay * theta;  theta <- theta - lr * v.
void sgd_step(ModelState& model, const std::vector<Tensor>& grads, double lr,
              double momentum = 0.9, double weight_decay = 1e-4);

/// base_lr * (1 - step / total_steps)^power.
double poly_lr(double base_lr, std::size_t step, std::size_t total_steps, double power = 2.0);

/// Reflect-pads a [C,H,W] tensor on the bottom/right edges.
Tensor reflect_pad(const Tensor& input, std::size_t out_h, std::size_t out_w);

void save_checkpoint(std::ostream& out, const ModelState& model);
ModelState load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ModelState& model);
ModelState load_checkpoint(const std::string& path);

}  // namespace c2f

#endif  // C2F_MODEL_HPP_
