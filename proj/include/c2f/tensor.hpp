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

// Dense float64 tensors and a small reverse-mode tape.
//
// Rasters are stored channel-planar, row-major: element (c, y, x) of a
// [C, H, W] tensor lives at index (c * H + y) * W + x.
//
// Every op runs eagerly. If any input requires a gradient, the op records a
// backward closure on the tape; Tape::backward replays those closures in
// exact reverse order, accumulating additively into input gradients.

#ifndef C2F_TENSOR_HPP_
#define C2F_TENSOR_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace c2f {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

/// Cache-line aligned allocation. Vectorized kernels peel a different number
/// of leading elements depending on the address, which changes rounding; a
/// fixed alignment keeps results bit-identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Rank-3 accessors.
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return values_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * shape_[1] + y) * shape_[2] + x];
  }

  bool all_finite() const noexcept;
  double sum() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  Buffer values_;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient after Tape::backward; an all-zero tensor if nothing flowed here.
  const Tensor& grad() const;
  bool requires_grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  /// Appends the output of an op. Throws NumericalError on non-finite values.
  /// The closure is kept only when some input requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);

  /// Seeds d(root)/d(root) = 1 and runs every recorded closure in reverse.
  void backward(Var root);

  /// Accumulation buffer used by backward closures (zero-allocated on demand).
  Tensor& grad_buffer(Var v);

  const Tensor& value_of(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& grad_of(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

// ---- tensor-level kernels (no tape) --------------------------------------

/// Output extent of a resize: round(extent * scale); throws if it is < 1.
std::size_t scaled_extent(std::size_t extent, double scale);

/// Bilinear resize of a [C,H,W] tensor, half-pixel centres (align_corners=false).
Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w);
Tensor bilinear_resize(const Tensor& input, double scale);
Tensor hflip(const Tensor& input);
/// Softmax over axis 0 of a [C, ...] tensor.
Tensor softmax(const Tensor& input);
Tensor spatial_gradient_norm(const Tensor& mask);

// ---- differentiable ops ---------------------------------------------------

/// input [C,H,W], kernel [Co,C,k,k], optional bias [Co].
Var conv2d(Var input, Var kernel, Var bias, int stride, int pad);
Var conv2d(Var input, Var kernel, int stride, int pad);
Var relu(Var x);
Var bilinear_resize(Var input, std::size_t out_h, std::size_t out_w);
Var bilinear_resize(Var input, double scale);
Var hflip(Var input);
Var concat_channels(Var a, Var b);
/// Keeps the top-left [C, h, w] window.
Var crop(Var input, std::size_t h, std::size_t w);
Var softmax(Var input);
/// softmax((logits + noise) / temperature) over the class axis.
Var gumbel_softmax(Var logits, double temperature, const Tensor& noise);
/// Per-pixel sqrt(sum_c (Dx y_c)^2 + (Dy y_c)^2), central differences with
/// replicate padding. [C,H,W] -> [H,W].
Var spatial_gradient_norm(Var mask);
Var sum(Var x);
Var weighted_sum(Var x, const Tensor& weights);
Var add(Var a, Var b);
Var scale(Var x, double factor);

/// Fills `noise` with i.i.d. standard Gumbel draws (-log(-log U)).
template <typename Urbg>
Tensor gumbel_noise(const Shape& shape, Urbg& rng);

}  // namespace c2f

#include <cmath>
#include <random>

namespace c2f {

template <typename Urbg>
Tensor gumbel_noise(const Shape& shape, Urbg& rng) {
  Tensor noise(shape);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (double& v : noise.values()) {
    double u = uniform(rng);
    while (u <= 0.0) u = uniform(rng);
    v = -std::log(-std::log(u));
  }
  return noise;
}

}  // namespace c2f

#endif  // C2F_TENSOR_HPP_
