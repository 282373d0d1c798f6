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

#include "c2f/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace c2f {
namespace {

constexpr std::uint64_t kGeometryStream = 0x67656f;
constexpr std::uint64_t kAppearanceStream = 0x617070;

struct Hsv {
  double h, s, v;
};

std::array<double, 3> hsv_to_rgb(Hsv c) {
  double h = c.h - std::floor(c.h);
  h *= 6.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = c.v * (1.0 - c.s);
  const double q = c.v * (1.0 - c.s * f);
  const double t = c.v * (1.0 - c.s * (1.0 - f));
  switch (sector) {
    case 0:
      return {c.v, t, p};
    case 1:
      return {q, c.v, p};
    case 2:
      return {p, c.v, t};
    case 3:
      return {p, q, c.v};
    case 4:
      return {t, p, c.v};
    default:
      return {c.v, p, q};
  }
}

// Base colour per class. Saturation and value alternate so that a few classes
// are close in colour and need texture or shape to be told apart.
Hsv class_color(int cls) {
  if (cls == 0) return {0.08, 0.15, 0.45};
  const double hue = std::fmod(0.13 + 0.61803398875 * cls, 1.0);
  const double sat = cls % 2 ? 0.55 : 0.35;
  const double val = cls % 3 == 0 ? 0.55 : 0.75;
  return {hue, sat, val};
}

struct Stripe {
  double kx, ky;
};

Stripe class_stripe(int cls) {
  const double period = 5.0 + 2.0 * (cls % 4);
  const double angle = cls * std::numbers::pi / 5.0;
  const double k = 2.0 * std::numbers::pi / period;
  return {k * std::cos(angle), k * std::sin(angle)};
}

struct Painted {
  std::vector<std::uint8_t> cls;
  std::vector<int> shape;  // -1 for background
  int shapes = 0;
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Painted paint_geometry(const SceneSpec& spec, Rng& rng) {
  const int h = spec.height, w = spec.width;
  const double side = std::min(h, w);
  Painted out;
  out.cls.assign(static_cast<std::size_t>(h) * w, 0);
  out.shape.assign(out.cls.size(), -1);
  const std::vector<double> weights = spec.weights();
  std::discrete_distribution<int> pick_class(weights.begin(), weights.end());
  const int count = uniform_int(rng, spec.min_shapes, spec.max_shapes);
  out.shapes = count;

  for (int s = 0; s < count; ++s) {
    const int cls = pick_class(rng);
    auto fill = [&](auto inside) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (inside(x + 0.5, y + 0.5)) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            out.cls[p] = static_cast<std::uint8_t>(cls);
            out.shape[p] = s;
          }
        }
      }
    };
    switch (spec.shape_of(cls)) {
      case ShapeKind::kRectangle: {
        const double rw = uniform(rng, spec.rect_extent[0], spec.rect_extent[1]) * w;
        const double rh = uniform(rng, spec.rect_extent[0], spec.rect_extent[1]) * h;
        const double x0 = uniform(rng, 0.0, std::max(0.0, w - rw));
        const double y0 = uniform(rng, 0.0, std::max(0.0, h - rh));
        fill([&](double x, double y) { return x >= x0 && x < x0 + rw && y >= y0 && y < y0 + rh; });
        break;
      }
      case ShapeKind::kDisk: {
        const double r = uniform(rng, spec.disk_radius[0], spec.disk_radius[1]) * side;
        const double cx = uniform(rng, 0.0, w);
        const double cy = uniform(rng, 0.0, h);
        fill([&](double x, double y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r; });
        break;
      }
      case ShapeKind::kTriangle: {
        const double ext = uniform(rng, spec.triangle_extent[0], spec.triangle_extent[1]) * side;
        const double cx = uniform(rng, 0.0, w);
        const double cy = uniform(rng, 0.0, h);
        double vx[3], vy[3];
        const double rot = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        for (int i = 0; i < 3; ++i) {
          const double a = rot + i * 2.0 * std::numbers::pi / 3.0 + uniform(rng, -0.3, 0.3);
          const double r = ext * uniform(rng, 0.5, 0.8);
          vx[i] = cx + r * std::cos(a);
          vy[i] = cy + r * std::sin(a);
        }
        auto edge = [](double ax, double ay, double bx, double by, double px, double py) {
          return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        };
        fill([&](double x, double y) {
          const double e0 = edge(vx[0], vy[0], vx[1], vy[1], x, y);
          const double e1 = edge(vx[1], vy[1], vx[2], vy[2], x, y);
          const double e2 = edge(vx[2], vy[2], vx[0], vy[0], x, y);
          return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
        });
        break;
      }
      case ShapeKind::kBar: {
        const int bw = uniform_int(rng, spec.bar_width[0], spec.bar_width[1]);
        const double len = uniform(rng, spec.bar_length[0], spec.bar_length[1]) * h;
        const int x0 = uniform_int(rng, 0, std::max(0, w - bw));
        const double y0 = uniform(rng, 0.0, std::max(0.0, h - len));
        fill([&](double x, double y) { return x >= x0 && x < x0 + bw && y >= y0 && y < y0 + len; });
        break;
      }
    }
  }
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  if (num_classes < 2 || num_classes > 255) throw UsageError("scene.num_classes must be in [2, 255]");
  if (height < 1 || width < 1 || height > 65535 || width > 65535) {
    throw UsageError("scene extents out of range");
  }
  if (min_shapes < 0 || max_shapes < min_shapes) throw UsageError("scene shape counts invalid");
  if (!class_weights.empty()) {
    if (class_weights.size() != static_cast<std::size_t>(num_classes)) {
      throw UsageError("scene.class_weights needs one entry per class");
    }
    for (int c = 1; c < num_classes; ++c) {
      if (!(class_weights[c] > 0.0)) throw UsageError("scene class weights must be > 0");
    }
  }
  if (!(decay > 0.0)) throw UsageError("scene.decay must be > 0");
  if (!shapes.empty() && shapes.size() != static_cast<std::size_t>(num_classes)) {
    throw UsageError("scene.shapes needs one entry per class");
  }
}

ShapeKind SceneSpec::shape_of(int cls) const {
  if (!shapes.empty()) return shapes.at(cls);
  if (num_classes >= 5 && cls >= num_classes - 2) return ShapeKind::kBar;
  if (cls == 1) return ShapeKind::kRectangle;
  return cls % 2 == 0 ? ShapeKind::kDisk : ShapeKind::kTriangle;
}

std::vector<double> SceneSpec::weights() const {
  std::vector<double> w(num_classes, 0.0);
  for (int c = 1; c < num_classes; ++c) {
    w[c] = class_weights.empty() ? std::pow(decay, c - 1) : class_weights[c];
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

Sample generate_scene(const SceneSpec& spec, SceneDomain domain, std::uint64_t index) {
  spec.validate();
  const auto domain_tag = static_cast<std::uint64_t>(domain) + 1;
  Rng geometry(derive_seed(spec.seed, kGeometryStream, spec.paired ? 0 : domain_tag, index));
  Rng appearance(derive_seed(spec.seed, kAppearanceStream, domain_tag, index));
  const Painted painted = paint_geometry(spec, geometry);

  const int h = spec.height, w = spec.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const bool real = domain == SceneDomain::kReal;

  // Per-class colours for this scene (hue jitter only in the real domain),
  // then per-shape offsets.
  std::vector<std::array<double, 3>> class_rgb(spec.num_classes);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int c = 0; c < spec.num_classes; ++c) {
    Hsv hsv = class_color(c);
    if (real) hsv.h += spec.domain_shift * uniform(appearance, -spec.real_hue_jitter, spec.real_hue_jitter);
    class_rgb[c] = hsv_to_rgb(hsv);
  }
  std::vector<std::array<double, 3>> shape_offset(painted.shapes + 1);
  for (auto& o : shape_offset) {
    for (double& v : o) v = spec.color_jitter * unit(appearance);
  }

  // Global colour mix and offset emulating a different camera pipeline.
  const double s = real ? spec.domain_shift : 0.0;
  const double mix[3][3] = {{0.80, 0.12, 0.08}, {0.06, 0.78, 0.16}, {0.10, 0.05, 0.85}};
  const double offset[3] = {0.06, 0.03, 0.09};

  Tensor image({3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  LabelMask label(h, w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const int cls = painted.cls[p];
      label.labels[p] = static_cast<std::uint8_t>(cls);
      const Stripe stripe = class_stripe(cls);
      const double pattern = spec.texture_amplitude * std::sin(stripe.kx * x + stripe.ky * y);
      const auto& off = shape_offset[painted.shape[p] + 1];
      double rgb[3];
      for (int ch = 0; ch < 3; ++ch) {
        rgb[ch] = class_rgb[cls][ch] + off[ch] + pattern + spec.texture_sigma * unit(appearance);
      }
      for (int ch = 0; ch < 3; ++ch) {
        double v = rgb[ch];
        if (real) {
          double mixed = 0.0;
          for (int k = 0; k < 3; ++k) mixed += mix[ch][k] * rgb[k];
          v = (1.0 - s) * rgb[ch] + s * (mixed + offset[ch]) + spec.real_noise_sigma * unit(appearance);
        }
        v = std::clamp(v, 0.0, 1.0);
        // Values are kept float32-representable so the on-disk format is lossless.
        image[ch * plane + p] = static_cast<double>(static_cast<float>(v));
      }
    }
  }
  label.mark_manual();

  Sample sample;
  sample.id = std::string(real ? "real/" : "synthetic/") + std::to_string(index);
  sample.domain = real ? Domain::kRealFine : Domain::kSynthetic;
  sample.image = std::move(image);
  sample.label = std::move(label);
  return sample;
}

SceneDataset generate_pool(const SceneSpec& spec, int n, SceneDomain domain,
                           std::uint64_t first_index) {
  if (n <= 0) throw UsageError("generate_pool: n must be >= 1");
  SceneDataset data;
  data.num_classes = spec.num_classes;
  data.items.reserve(n);
  for (int i = 0; i < n; ++i) data.items.push_back(generate_scene(spec, domain, first_index + i));
  return data;
}

std::vector<std::uint64_t> class_histogram(const SceneDataset& data) {
  std::vector<std::uint64_t> hist(data.num_classes, 0);
  for (const Sample& s : data.items) {
    for (std::uint8_t l : s.label.labels) {
      if (l != kIgnore && l < hist.size()) ++hist[l];
    }
  }
  return hist;
}

}  // namespace c2f
