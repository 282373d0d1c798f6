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

#include "c2f/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "binary_io.hpp"
#include "c2f/common.hpp"

namespace c2f {
namespace {

constexpr char kCheckpointMagic[4] = {'C', '2', 'F', 'M'};
constexpr std::uint16_t kCheckpointVersion = 1;
constexpr double kInputMean = 0.5;

struct LayerShape {
  std::size_t out, in, k;
};

// Encoder convs, decoder convs (deepest first), then the classification head.
std::vector<LayerShape> layer_shapes(const ArchConfig& arch) {
  if (arch.channels.empty()) throw std::invalid_argument("ArchConfig: no stages");
  if (arch.num_classes < 1 || arch.in_channels < 1) {
    throw std::invalid_argument("ArchConfig: bad channel counts");
  }
  if (arch.decoder_kernel < 1 || arch.decoder_kernel % 2 == 0) {
    throw std::invalid_argument("ArchConfig: decoder kernel must be odd");
  }
  std::vector<LayerShape> shapes;
  auto ch = [&](std::size_t i) { return static_cast<std::size_t>(arch.channels[i]); };
  const std::size_t stages = arch.channels.size();
  shapes.push_back({ch(0), static_cast<std::size_t>(arch.in_channels), 3});
  for (std::size_t s = 1; s < stages; ++s) shapes.push_back({ch(s), ch(s - 1), 3});
  std::size_t carried = ch(stages - 1);
  for (std::size_t s = stages - 1; s-- > 0;) {
    shapes.push_back({ch(s), carried + ch(s), static_cast<std::size_t>(arch.decoder_kernel)});
    carried = ch(s);
  }
  shapes.push_back({static_cast<std::size_t>(arch.num_classes), carried, 1});
  return shapes;
}

std::size_t reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

void check_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericalError(std::string(what) + ": non-finite values");
}

void write_tensor(std::ostream& out, const Tensor& t) {
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (double v : t.values()) detail::put_f64(out, v);
}

Tensor read_tensor(detail::ByteReader& in) {
  const auto rank = in.get_le<std::uint8_t>("tensor rank");
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = in.get_le<std::uint32_t>("tensor extent");
    count *= d;
  }
  std::vector<double> values(count);
  for (double& v : values) v = in.get_f64("tensor data");
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

ModelState init_model(const ArchConfig& arch, std::uint64_t seed) {
  ModelState model;
  model.arch = arch;
  Rng rng(seed);
  const auto shapes = layer_shapes(arch);
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    Tensor weight({s.out, s.in, s.k, s.k});
    const bool head = l + 1 == shapes.size();
    if (!(head && arch.zero_init_head)) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(s.in * s.k * s.k)));
      for (double& v : weight.values()) v = normal(rng);
    }
    model.params.push_back(std::move(weight));
    model.params.emplace_back(Shape{s.out}, 0.0);
  }
  for (const Tensor& p : model.params) model.momentum.emplace_back(p.shape(), 0.0);
  return model;
}

Tensor reflect_pad(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  if (out_h < height || out_w < width) throw ShapeError("reflect_pad: target smaller than input");
  Tensor out({channels, out_h, out_w});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const std::size_t sy = reflect_index(static_cast<long>(y), static_cast<long>(height));
      for (std::size_t x = 0; x < out_w; ++x) {
        out.at(c, y, x) =
            input.at(c, sy, reflect_index(static_cast<long>(x), static_cast<long>(width)));
      }
    }
  }
  return out;
}

Var forward(Tape& tape, const ModelState& model, Var image, std::vector<Var>& params) {
  const ArchConfig& arch = model.arch;
  const auto shapes = layer_shapes(arch);
  if (model.params.size() != 2 * shapes.size()) {
    throw std::invalid_argument("forward: parameter count does not match architecture");
  }
  const Tensor& x = image.value();
  if (x.rank() != 3 || x.dim(0) != static_cast<std::size_t>(arch.in_channels)) {
    throw ShapeError("forward: image shape " + shape_string(x.shape()));
  }
  if (params.empty()) {
    for (const Tensor& p : model.params) params.push_back(tape.variable(p));
  } else if (params.size() != model.params.size()) {
    throw std::invalid_argument("forward: supplied parameter Vars do not match the model");
  }

  const std::size_t height = x.dim(1), width = x.dim(2);
  const auto factor = static_cast<std::size_t>(arch.downsample());
  const std::size_t padded_h = (height + factor - 1) / factor * factor;
  const std::size_t padded_w = (width + factor - 1) / factor * factor;
  Var input = image;
  if (padded_h != height || padded_w != width) {
    input = tape.constant(reflect_pad(x, padded_h, padded_w));
  }
  // Images live in [0, 1]; centring them keeps early updates well scaled.
  input = add(input, tape.constant(Tensor(input.value().shape(), -kInputMean)));

  const std::size_t stages = arch.channels.size();
  std::size_t layer = 0;
  auto conv = [&](Var in, int stride) {
    const int k = static_cast<int>(shapes[layer].k);
    Var out = conv2d(in, params[2 * layer], params[2 * layer + 1], stride, k / 2);
    ++layer;
    return out;
  };

  std::vector<Var> skips;
  Var h = input;
  for (std::size_t s = 0; s < stages; ++s) {
    h = relu(conv(h, s == 0 ? 1 : 2));
    skips.push_back(h);
  }
  for (std::size_t s = stages - 1; s-- > 0;) {
    const Tensor& skip = skips[s].value();
    Var up = bilinear_resize(h, skip.dim(1), skip.dim(2));
    h = relu(conv(concat_channels(up, skips[s]), 1));
  }
  Var logits = conv(h, 1);
  if (padded_h != height || padded_w != width) logits = crop(logits, height, width);
  return logits;
}

Tensor predict_logits(const ModelState& model, const Tensor& image) {
  Tape tape;
  std::vector<Var> params;
  Var image_var = tape.constant(image);
  Var logits = forward(tape, model, image_var, params);
  return logits.value();
}

void sgd_step(ModelState& model, const std::vector<Tensor>& grads, double lr, double momentum,
              double weight_decay) {
  if (grads.size() != model.params.size()) {
    throw std::invalid_argument("sgd_step: gradient count mismatch");
  }
  for (const Tensor& g : grads) check_finite(g, "sgd_step gradient");
  if (model.momentum.size() != model.params.size()) {
    model.momentum.clear();
    for (const Tensor& p : model.params) model.momentum.emplace_back(p.shape(), 0.0);
  }
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    Tensor& theta = model.params[i];
    Tensor& v = model.momentum[i];
    const Tensor& g = grads[i];
    if (g.shape() != theta.shape()) throw ShapeError("sgd_step: gradient shape mismatch");
    for (std::size_t j = 0; j < theta.numel(); ++j) {
      v[j] = momentum * v[j] + g[j] + weight_decay * theta[j];
      theta[j] -= lr * v[j];
    }
    check_finite(theta, "sgd_step update");
  }
}

double poly_lr(double base_lr, std::size_t step, std::size_t total_steps, double power) {
  if (total_steps == 0) throw std::invalid_argument("poly_lr: total_steps must be > 0");
  if (step > total_steps) throw std::invalid_argument("poly_lr: step beyond total_steps");
  const double remaining = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * std::pow(remaining, power);
}

void save_checkpoint(std::ostream& out, const ModelState& model) {
  out.write(kCheckpointMagic, 4);
  detail::put_le<std::uint16_t>(out, kCheckpointVersion);
  const ArchConfig& a = model.arch;
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.in_channels));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.num_classes));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.decoder_kernel));
  detail::put_le<std::uint8_t>(out, a.zero_init_head ? 1 : 0);
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.channels.size()));
  for (int c : a.channels) detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(c));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.size()));
  for (const Tensor& p : model.params) write_tensor(out, p);
  const bool has_momentum = model.momentum.size() == model.params.size();
  detail::put_le<std::uint8_t>(out, has_momentum ? 1 : 0);
  if (has_momentum) {
    for (const Tensor& m : model.momentum) write_tensor(out, m);
  }
  if (!out) throw DataError("failed writing checkpoint");
}

ModelState load_checkpoint(std::istream& in) {
  detail::ByteReader reader(in);
  char magic[4];
  reader.read_raw(magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic at offset 0");
  }
  const auto version = reader.get_le<std::uint16_t>("checkpoint version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelState model;
  model.arch.in_channels = reader.get_le<std::uint16_t>("in_channels");
  model.arch.num_classes = reader.get_le<std::uint16_t>("num_classes");
  model.arch.decoder_kernel = reader.get_le<std::uint16_t>("decoder_kernel");
  model.arch.zero_init_head = reader.get_le<std::uint8_t>("zero_init_head") != 0;
  model.arch.channels.resize(reader.get_le<std::uint16_t>("stage count"));
  for (int& c : model.arch.channels) c = reader.get_le<std::uint16_t>("stage channels");
  const auto count = reader.get_le<std::uint32_t>("parameter count");
  const auto shapes = layer_shapes(model.arch);
  if (count != 2 * shapes.size()) throw DataError("checkpoint: parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) model.params.push_back(read_tensor(reader));
  if (reader.get_le<std::uint8_t>("momentum flag") != 0) {
    for (std::uint32_t i = 0; i < count; ++i) model.momentum.push_back(read_tensor(reader));
  }
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const Shape expected{shapes[l].out, shapes[l].in, shapes[l].k, shapes[l].k};
    if (model.params[2 * l].shape() != expected || model.params[2 * l + 1].shape() != Shape{shapes[l].out}) {
      throw DataError("checkpoint: layer " + std::to_string(l) + " has unexpected shape");
    }
  }
  return model;
}

void save_checkpoint(const std::string& path, const ModelState& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  save_checkpoint(out, model);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace c2f
