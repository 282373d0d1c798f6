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

#include "c2f/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <utility>

namespace c2f {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
}

// Per-axis sampling table for bilinear interpolation with half-pixel centres.
struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w_lo, w_hi;
};

AxisTaps axis_taps(std::size_t in, std::size_t out) {
  AxisTaps taps;
  taps.lo.resize(out);
  taps.hi.resize(out);
  taps.w_lo.resize(out);
  taps.w_hi.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    taps.lo[o] = i0;
    taps.hi[o] = i1;
    taps.w_lo[o] = 1.0 - frac;
    taps.w_hi[o] = frac;
  }
  return taps;
}

// Lays out the k*k receptive fields of `input` as columns:
// col[(c*k + ky)*k + kx, oy*Wo + ox].
void im2col(const Tensor& input, int k, int stride, int pad, std::size_t out_h, std::size_t out_w,
            Buffer& col) {
  const std::size_t channels = input.dim(0);
  const auto height = static_cast<long>(input.dim(1));
  const auto width = static_cast<long>(input.dim(2));
  const std::size_t plane = out_h * out_w;
  col.assign(channels * k * k * plane, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = input.data() + c * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col.data() + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long y = static_cast<long>(oy) * stride - pad + ky;
          if (y < 0 || y >= height) continue;
          const double* row = src + y * width;
          double* out_row = dst + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long x = static_cast<long>(ox) * stride - pad + kx;
            if (x >= 0 && x < width) out_row[ox] = row[x];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int k, int stride, int pad, std::size_t out_h,
                std::size_t out_w, Tensor& grad_input) {
  const std::size_t channels = grad_input.dim(0);
  const auto height = static_cast<long>(grad_input.dim(1));
  const auto width = static_cast<long>(grad_input.dim(2));
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    double* dst = grad_input.data() + c * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long y = static_cast<long>(oy) * stride - pad + ky;
          if (y < 0 || y >= height) continue;
          double* row = dst + y * width;
          const double* in_row = src + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long x = static_cast<long>(ox) * stride - pad + kx;
            if (x >= 0 && x < width) row[x] += in_row[ox];
          }
        }
      }
    }
  }
}

Tape& tape_of(Var v, const char* op) {
  if (!v.valid()) throw std::invalid_argument(std::string(op) + ": invalid Var");
  return *v.tape();
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor -----------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (values_.size() != shape_numel(shape_)) {
    throw ShapeError("Tensor: " + std::to_string(values_.size()) + " values for shape " +
                     shape_string(shape_));
  }
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const noexcept { return std::accumulate(values_.begin(), values_.end(), 0.0); }

// ---- Var / Tape -------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value_of(id_); }
const Tensor& Var::grad() const { return tape_->grad_of(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  if (!value.all_finite()) throw NumericalError("non-finite value produced by tensor op");
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.valid()) {
      if (in.tape() != this) throw std::invalid_argument("Var belongs to a different tape");
      needs = needs || nodes_[in.id()].requires_grad;
    }
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(Var v) {
  Node& node = nodes_.at(v.id());
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

const Tensor& Tape::grad_of(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::invalid_argument("backward: root on a different tape");
  if (nodes_.at(root.id()).value.numel() != 1) {
    throw ShapeError("backward: root must be a scalar, got " +
                     shape_string(nodes_[root.id()].value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buffer(root)[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, node.grad);
  }
}

// ---- tensor-level kernels ---------------------------------------------------

std::size_t scaled_extent(std::size_t extent, double scale) {
  if (!(scale > 0.0)) throw ShapeError("resize: scale must be positive");
  const double v = std::round(static_cast<double>(extent) * scale);
  if (v < 1.0) throw ShapeError("resize: output extent < 1");
  return static_cast<std::size_t>(v);
}

Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  require_rank(input, 3, "bilinear_resize");
  if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: output extent < 1");
  const std::size_t channels = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
  if (out_h == in_h && out_w == in_w) return input;
  const AxisTaps ty = axis_taps(in_h, out_h), tx = axis_taps(in_w, out_w);
  Tensor out({channels, out_h, out_w});
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = input.data() + c * in_h * in_w;
    double* dst = out.data() + c * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double* r0 = src + ty.lo[oy] * in_w;
      const double* r1 = src + ty.hi[oy] * in_w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double top = tx.w_lo[ox] * r0[tx.lo[ox]] + tx.w_hi[ox] * r0[tx.hi[ox]];
        const double bottom = tx.w_lo[ox] * r1[tx.lo[ox]] + tx.w_hi[ox] * r1[tx.hi[ox]];
        dst[oy * out_w + ox] = ty.w_lo[oy] * top + ty.w_hi[oy] * bottom;
      }
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, double scale) {
  require_rank(input, 3, "bilinear_resize");
  return bilinear_resize(input, scaled_extent(input.dim(1), scale),
                         scaled_extent(input.dim(2), scale));
}

Tensor hflip(const Tensor& input) {
  require_rank(input, 3, "hflip");
  Tensor out(input.shape());
  const std::size_t rows = input.dim(0) * input.dim(1), width = input.dim(2);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = input.data() + r * width;
    double* dst = out.data() + r * width;
    for (std::size_t x = 0; x < width; ++x) dst[x] = src[width - 1 - x];
  }
  return out;
}

Tensor softmax(const Tensor& input) {
  if (input.rank() < 1 || input.numel() == 0) throw ShapeError("softmax: empty input");
  if (!input.all_finite()) throw NumericalError("softmax: non-finite input");
  const std::size_t classes = input.dim(0);
  const std::size_t stride = input.numel() / classes;
  Tensor out(input.shape());
  const double* in = input.data();
  double* o = out.data();
  for (std::size_t j = 0; j < stride; ++j) {
    double peak = in[j];
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, in[c * stride + j]);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double e = std::exp(in[c * stride + j] - peak);
      o[c * stride + j] = e;
      total += e;
    }
    const double inv = 1.0 / total;
    for (std::size_t c = 0; c < classes; ++c) o[c * stride + j] *= inv;
  }
  return out;
}

namespace {

// Central differences with replicate padding, per channel.
void central_differences(const Tensor& mask, Tensor& dx, Tensor& dy) {
  const std::size_t channels = mask.dim(0), height = mask.dim(1), width = mask.dim(2);
  dx = Tensor(mask.shape());
  dy = Tensor(mask.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t up = y == 0 ? 0 : y - 1;
      const std::size_t down = std::min(y + 1, height - 1);
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t left = x == 0 ? 0 : x - 1;
        const std::size_t right = std::min(x + 1, width - 1);
        dx.at(c, y, x) = 0.5 * (mask.at(c, y, right) - mask.at(c, y, left));
        dy.at(c, y, x) = 0.5 * (mask.at(c, down, x) - mask.at(c, up, x));
      }
    }
  }
}

}  // namespace

Tensor spatial_gradient_norm(const Tensor& mask) {
  require_rank(mask, 3, "spatial_gradient_norm");
  Tensor dx, dy;
  central_differences(mask, dx, dy);
  const std::size_t channels = mask.dim(0), plane = mask.dim(1) * mask.dim(2);
  Tensor out({mask.dim(1), mask.dim(2)});
  for (std::size_t p = 0; p < plane; ++p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double gx = dx[c * plane + p], gy = dy[c * plane + p];
      acc += gx * gx + gy * gy;
    }
    out[p] = std::sqrt(acc);
  }
  return out;
}

// ---- differentiable ops -----------------------------------------------------

Var conv2d(Var input, Var kernel, Var bias, int stride, int pad) {
  Tape& tape = tape_of(input, "conv2d");
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  require_rank(x, 3, "conv2d input");
  require_rank(w, 4, "conv2d kernel");
  const std::size_t channels = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::size_t out_channels = w.dim(0);
  const int k = static_cast<int>(w.dim(2));
  if (w.dim(1) != channels || w.dim(3) != w.dim(2)) {
    throw ShapeError("conv2d: kernel " + shape_string(w.shape()) + " does not match input " +
                     shape_string(x.shape()));
  }
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  if (height + 2 * pad < static_cast<std::size_t>(k) ||
      width + 2 * pad < static_cast<std::size_t>(k)) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) + " smaller than kernel");
  }
  if (bias.valid() && (bias.value().rank() != 1 || bias.value().dim(0) != out_channels)) {
    throw ShapeError("conv2d: bias shape " + shape_string(bias.value().shape()));
  }
  const std::size_t out_h = (height + 2 * pad - k) / stride + 1;
  const std::size_t out_w = (width + 2 * pad - k) / stride + 1;
  const std::size_t plane = out_h * out_w;
  const std::size_t patch = channels * k * k;

  // A 1x1, stride-1, unpadded conv reads the input directly as its column matrix.
  const bool pointwise = k == 1 && stride == 1 && pad == 0;
  auto col = std::make_shared<Buffer>();
  if (!pointwise) im2col(x, k, stride, pad, out_h, out_w, *col);
  const double* col_data = pointwise ? x.data() : col->data();

  Tensor out({out_channels, out_h, out_w});
  MatrixMap out_m(out.data(), out_channels, plane);
  ConstMatrixMap w_m(w.data(), out_channels, patch);
  ConstMatrixMap col_m(col_data, patch, plane);
  out_m.noalias() = w_m * col_m;
  if (bias.valid()) {
    for (std::size_t o = 0; o < out_channels; ++o) out_m.row(o).array() += bias.value()[o];
  }

  return tape.record(
      std::move(out), {input, kernel, bias},
      [input, kernel, bias, col, pointwise, k, stride, pad, out_h, out_w, plane, patch,
       out_channels](Tape& t, const Tensor& g) {
        ConstMatrixMap g_m(g.data(), out_channels, plane);
        const double* cols = pointwise ? input.value().data() : col->data();
        ConstMatrixMap col_m(cols, patch, plane);
        if (kernel.requires_grad()) {
          MatrixMap gw(t.grad_buffer(kernel).data(), out_channels, patch);
          gw.noalias() += g_m * col_m.transpose();
        }
        if (bias.valid() && bias.requires_grad()) {
          Tensor& gb = t.grad_buffer(bias);
          for (std::size_t o = 0; o < out_channels; ++o) gb[o] += g_m.row(o).sum();
        }
        if (input.requires_grad()) {
          ConstMatrixMap w_m(kernel.value().data(), out_channels, patch);
          Tensor& gx = t.grad_buffer(input);
          if (pointwise) {
            MatrixMap gx_m(gx.data(), patch, plane);
            gx_m.noalias() += w_m.transpose() * g_m;
          } else {
            RowMatrix dcol = w_m.transpose() * g_m;
            col2im_add(dcol.data(), k, stride, pad, out_h, out_w, gx);
          }
        }
      });
}

Var conv2d(Var input, Var kernel, int stride, int pad) {
  return conv2d(input, kernel, Var(), stride, pad);
}

Var relu(Var x) {
  Tape& tape = tape_of(x, "relu");
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return tape.record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    const Tensor& in = x.value();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (in[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var bilinear_resize(Var input, std::size_t out_h, std::size_t out_w) {
  Tape& tape = tape_of(input, "bilinear_resize");
  const Tensor& x = input.value();
  Tensor out = bilinear_resize(x, out_h, out_w);
  const std::size_t channels = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  return tape.record(std::move(out), {input},
                     [input, channels, in_h, in_w, out_h, out_w](Tape& t, const Tensor& g) {
                       Tensor& gx = t.grad_buffer(input);
                       if (in_h == out_h && in_w == out_w) {
                         add_into(gx, g);
                         return;
                       }
                       const AxisTaps ty = axis_taps(in_h, out_h), tx = axis_taps(in_w, out_w);
                       for (std::size_t c = 0; c < channels; ++c) {
                         double* dst = gx.data() + c * in_h * in_w;
                         const double* src = g.data() + c * out_h * out_w;
                         for (std::size_t oy = 0; oy < out_h; ++oy) {
                           double* r0 = dst + ty.lo[oy] * in_w;
                           double* r1 = dst + ty.hi[oy] * in_w;
                           for (std::size_t ox = 0; ox < out_w; ++ox) {
                             const double v = src[oy * out_w + ox];
                             const double top = ty.w_lo[oy] * v, bottom = ty.w_hi[oy] * v;
                             r0[tx.lo[ox]] += tx.w_lo[ox] * top;
                             r0[tx.hi[ox]] += tx.w_hi[ox] * top;
                             r1[tx.lo[ox]] += tx.w_lo[ox] * bottom;
                             r1[tx.hi[ox]] += tx.w_hi[ox] * bottom;
                           }
                         }
                       }
                     });
}

Var bilinear_resize(Var input, double scale) {
  const Tensor& x = input.value();
  require_rank(x, 3, "bilinear_resize");
  return bilinear_resize(input, scaled_extent(x.dim(1), scale), scaled_extent(x.dim(2), scale));
}

Var hflip(Var input) {
  Tape& tape = tape_of(input, "hflip");
  return tape.record(hflip(input.value()), {input}, [input](Tape& t, const Tensor& g) {
    add_into(t.grad_buffer(input), hflip(g));
  });
}

Var concat_channels(Var a, Var b) {
  Tape& tape = tape_of(a, "concat_channels");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank(x, 3, "concat_channels");
  require_rank(y, 3, "concat_channels");
  if (x.dim(1) != y.dim(1) || x.dim(2) != y.dim(2)) {
    throw ShapeError("concat_channels: " + shape_string(x.shape()) + " vs " +
                     shape_string(y.shape()));
  }
  Tensor out({x.dim(0) + y.dim(0), x.dim(1), x.dim(2)});
  std::copy(x.values().begin(), x.values().end(), out.data());
  std::copy(y.values().begin(), y.values().end(), out.data() + x.numel());
  const std::size_t split = x.numel();
  return tape.record(std::move(out), {a, b}, [a, b, split](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += g[split + i];
    }
  });
}

Var crop(Var input, std::size_t h, std::size_t w) {
  Tape& tape = tape_of(input, "crop");
  const Tensor& x = input.value();
  require_rank(x, 3, "crop");
  if (h > x.dim(1) || w > x.dim(2) || h == 0 || w == 0) {
    throw ShapeError("crop: window larger than input " + shape_string(x.shape()));
  }
  if (h == x.dim(1) && w == x.dim(2)) {
    return tape.record(Tensor(x), {input},
                       [input](Tape& t, const Tensor& g) { add_into(t.grad_buffer(input), g); });
  }
  const std::size_t channels = x.dim(0), in_w = x.dim(2), in_h = x.dim(1);
  Tensor out({channels, h, w});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) out.at(c, y, xx) = x.at(c, y, xx);
  return tape.record(std::move(out), {input},
                     [input, channels, h, w, in_h, in_w](Tape& t, const Tensor& g) {
                       Tensor& gx = t.grad_buffer(input);
                       for (std::size_t c = 0; c < channels; ++c)
                         for (std::size_t y = 0; y < h; ++y)
                           for (std::size_t xx = 0; xx < w; ++xx)
                             gx[(c * in_h + y) * in_w + xx] += g[(c * h + y) * w + xx];
                     });
}

namespace {

// d softmax: dx_c = s_c * (g_c - sum_k g_k s_k), per location.
void softmax_backward(const Tensor& s, const Tensor& g, double factor, Tensor& gx) {
  const std::size_t classes = s.dim(0);
  const std::size_t stride = s.numel() / classes;
  for (std::size_t j = 0; j < stride; ++j) {
    double dot = 0.0;
    for (std::size_t c = 0; c < classes; ++c) dot += g[c * stride + j] * s[c * stride + j];
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t i = c * stride + j;
      gx[i] += factor * s[i] * (g[i] - dot);
    }
  }
}

}  // namespace

Var softmax(Var input) {
  Tape& tape = tape_of(input, "softmax");
  Tensor out = softmax(input.value());
  auto saved = std::make_shared<Tensor>(out);
  return tape.record(std::move(out), {input}, [input, saved](Tape& t, const Tensor& g) {
    softmax_backward(*saved, g, 1.0, t.grad_buffer(input));
  });
}

Var gumbel_softmax(Var logits, double temperature, const Tensor& noise) {
  Tape& tape = tape_of(logits, "gumbel_softmax");
  if (!(temperature > 0.0)) throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
  const Tensor& z = logits.value();
  if (noise.shape() != z.shape()) {
    throw ShapeError("gumbel_softmax: noise " + shape_string(noise.shape()) + " vs logits " +
                     shape_string(z.shape()));
  }
  Tensor perturbed(z.shape());
  for (std::size_t i = 0; i < z.numel(); ++i) perturbed[i] = (z[i] + noise[i]) / temperature;
  Tensor out = softmax(perturbed);
  auto saved = std::make_shared<Tensor>(out);
  const double inv_t = 1.0 / temperature;
  return tape.record(std::move(out), {logits}, [logits, saved, inv_t](Tape& t, const Tensor& g) {
    softmax_backward(*saved, g, inv_t, t.grad_buffer(logits));
  });
}

Var spatial_gradient_norm(Var mask) {
  Tape& tape = tape_of(mask, "spatial_gradient_norm");
  const Tensor& m = mask.value();
  require_rank(m, 3, "spatial_gradient_norm");
  auto dx = std::make_shared<Tensor>();
  auto dy = std::make_shared<Tensor>();
  central_differences(m, *dx, *dy);
  const std::size_t channels = m.dim(0), height = m.dim(1), width = m.dim(2);
  const std::size_t plane = height * width;
  Tensor out({height, width});
  for (std::size_t p = 0; p < plane; ++p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      acc += (*dx)[c * plane + p] * (*dx)[c * plane + p] + (*dy)[c * plane + p] * (*dy)[c * plane + p];
    }
    out[p] = std::sqrt(acc);
  }
  auto norm = std::make_shared<Tensor>(out);
  return tape.record(
      std::move(out), {mask},
      [mask, dx, dy, norm, channels, height, width, plane](Tape& t, const Tensor& g) {
        Tensor& gm = t.grad_buffer(mask);
        for (std::size_t y = 0; y < height; ++y) {
          const std::size_t up = y == 0 ? 0 : y - 1;
          const std::size_t down = std::min(y + 1, height - 1);
          for (std::size_t x = 0; x < width; ++x) {
            const std::size_t p = y * width + x;
            const double n = (*norm)[p];
            // sqrt is not differentiable at 0; take the zero subgradient there.
            if (n <= 0.0 || g[p] == 0.0) continue;
            const double s = g[p] / n;
            const std::size_t left = x == 0 ? 0 : x - 1;
            const std::size_t right = std::min(x + 1, width - 1);
            for (std::size_t c = 0; c < channels; ++c) {
              const double gx = 0.5 * s * (*dx)[c * plane + p];
              const double gy = 0.5 * s * (*dy)[c * plane + p];
              double* base = gm.data() + c * plane;
              base[y * width + right] += gx;
              base[y * width + left] -= gx;
              base[down * width + x] += gy;
              base[up * width + x] -= gy;
            }
          }
        }
      });
}

Var sum(Var x) {
  Tape& tape = tape_of(x, "sum");
  return tape.record(Tensor({1}, x.value().sum()), {x}, [x](Tape& t, const Tensor& g) {
    for (double& v : t.grad_buffer(x).values()) v += g[0];
  });
}

Var weighted_sum(Var x, const Tensor& weights) {
  Tape& tape = tape_of(x, "weighted_sum");
  if (weights.numel() != x.value().numel()) throw ShapeError("weighted_sum: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.numel(); ++i) acc += weights[i] * x.value()[i];
  auto w = std::make_shared<Tensor>(weights);
  return tape.record(Tensor({1}, acc), {x}, [x, w](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0] * (*w)[i];
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, "add");
  if (a.value().shape() != b.value().shape()) throw ShapeError("add: shape mismatch");
  Tensor out = a.value();
  add_into(out, b.value());
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) add_into(t.grad_buffer(a), g);
    if (b.requires_grad()) add_into(t.grad_buffer(b), g);
  });
}

Var scale(Var x, double factor) {
  Tape& tape = tape_of(x, "scale");
  Tensor out = x.value();
  for (double& v : out.values()) v *= factor;
  return tape.record(std::move(out), {x}, [x, factor](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += factor * g[i];
  });
}

}  // namespace c2f
