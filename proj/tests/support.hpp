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

// Helpers shared by the unit tests.

#ifndef C2F_TESTS_SUPPORT_HPP_
#define C2F_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "c2f/common.hpp"
#include "c2f/tensor.hpp"

namespace c2f::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline LabelMask random_mask(int h, int w, int classes, Rng& rng, double p_ignore = 0.0) {
  LabelMask m(h, w, 0);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::bernoulli_distribution ignore(p_ignore);
  for (auto& l : m.labels) l = ignore(rng) ? kIgnore : static_cast<std::uint8_t>(cls(rng));
  return m;
}

/// Gradient magnitude at one pixel: central differences with replicate
/// padding, summed over channels, written out without the library kernels.
inline double gamma_at(const Tensor& m, std::size_t y, std::size_t x) {
  const long H = static_cast<long>(m.dim(1)), W = static_cast<long>(m.dim(2));
  auto v = [&](std::size_t c, long yy, long xx) {
    return m.at(c, std::clamp(yy, 0L, H - 1), std::clamp(xx, 0L, W - 1));
  };
  const long py = static_cast<long>(y), px = static_cast<long>(x);
  double acc = 0.0;
  for (std::size_t c = 0; c < m.dim(0); ++c) {
    const double gx = 0.5 * (v(c, py, px + 1) - v(c, py, px - 1));
    const double gy = 0.5 * (v(c, py + 1, px) - v(c, py - 1, px));
    acc += gx * gx + gy * gy;
  }
  return std::sqrt(acc);
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the tape gradient of the scalar f(x) with central differences.
/// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps exact
/// zeros from dividing by zero.
inline GradCheck grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                            double eps = 1e-5, double floor = 1e-4) {
  Tape tape;
  Var xv = tape.variable(x);
  Var y = f(tape, xv);
  tape.backward(y);
  const Tensor analytic = xv.grad();

  auto eval = [&](const Tensor& at) {
    Tape t;
    return f(t, t.variable(at)).value()[0];
  };
  GradCheck out;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(probe);
    probe[i] = x[i] - eps;
    const double down = eval(probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > out.max_rel_error) out = {rel, i, analytic[i], numeric};
  }
  return out;
}

/// Reduces a tensor-valued op to a scalar with fixed random weights so every
/// output element contributes to the checked gradient.
inline Var project(Var y, std::uint64_t seed) {
  Rng rng(seed);
  return weighted_sum(y, random_tensor(y.value().shape(), rng));
}

}  // namespace c2f::testing

#endif  // C2F_TESTS_SUPPORT_HPP_
