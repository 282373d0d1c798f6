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

#include <doctest.h>

#include <sstream>

#include "c2f/losses.hpp"
#include "c2f/model.hpp"
#include "support.hpp"

using namespace c2f;
using c2f::testing::grad_check;
using c2f::testing::random_mask;
using c2f::testing::random_tensor;

namespace {

ArchConfig small_arch(int classes) {
  ArchConfig arch;
  arch.num_classes = classes;
  arch.channels = {4, 6, 8};
  return arch;
}

double example_loss(const ModelState& m, const Tensor& image, const LabelMask& target) {
  Tape tape;
  std::vector<Var> params;
  return cross_entropy(forward(tape, m, tape.constant(image), params), target).value()[0];
}

}  // namespace

TEST_CASE("forward output shape") {
  const ModelState m = init_model(ArchConfig{}, 1);
  Rng rng(1);
  CHECK(predict_logits(m, random_tensor({3, 64, 64}, rng, 0, 1)).shape() == Shape{8, 64, 64});
  // Extents that are not multiples of 4 are padded and cropped back.
  CHECK(predict_logits(m, random_tensor({3, 30, 21}, rng, 0, 1)).shape() == Shape{8, 30, 21});
  CHECK(predict_logits(m, random_tensor({3, 5, 7}, rng, 0, 1)).shape() == Shape{8, 5, 7});
  CHECK_THROWS_AS(predict_logits(m, Tensor({1, 8, 8})), ShapeError);
}

TEST_CASE("forward is deterministic") {
  const ModelState m = init_model(small_arch(3), 9);
  Rng rng(2);
  const Tensor x = random_tensor({3, 16, 16}, rng, 0, 1);
  CHECK(predict_logits(m, x) == predict_logits(m, x));
  CHECK(init_model(small_arch(3), 9).params == m.params);
  CHECK(init_model(small_arch(3), 10).params != m.params);
}

TEST_CASE("a zero-initialised head gives spatially uniform logits") {
  ArchConfig arch = small_arch(5);
  arch.zero_init_head = true;
  const ModelState m = init_model(arch, 3);
  Rng rng(3);
  const Tensor z = predict_logits(m, random_tensor({3, 16, 16}, rng, 0, 1));
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t p = 0; p < 256; ++p) CHECK(z[c * 256 + p] == z[c * 256]);
  }
}

TEST_CASE("gradient: end-to-end through the network") {
  ArchConfig arch = small_arch(3);
  arch.decoder_kernel = 3;
  const ModelState m = init_model(arch, 4);
  Rng rng(4);
  const Tensor image = random_tensor({3, 8, 8}, rng, 0, 1);
  const LabelMask target = random_mask(8, 8, 3, rng, 0.1);
  for (std::size_t which = 0; which < m.params.size(); ++which) {
    auto r = grad_check(
        [&](Tape& t, Var v) {
          std::vector<Var> params;
          for (std::size_t i = 0; i < m.params.size(); ++i) {
            params.push_back(i == which ? v : t.constant(m.params[i]));
          }
          return cross_entropy(forward(t, m, t.constant(image), params), target);
        },
        m.params[which]);
    CHECK_MESSAGE(r.max_rel_error < 1e-4, "parameter tensor " << which);
  }
  auto wrt_image = grad_check(
      [&](Tape& t, Var v) {
        std::vector<Var> params;
        return cross_entropy(forward(t, m, v, params), target);
      },
      image);
  CHECK(wrt_image.max_rel_error < 1e-4);
}

TEST_CASE("sgd step arithmetic") {
  ModelState m = init_model(small_arch(2), 5);
  std::vector<Tensor> grads;
  for (const Tensor& p : m.params) grads.emplace_back(p.shape(), 0.5);

  SUBCASE("momentum 0 and no decay is plain descent") {
    ModelState n = m;
    sgd_step(n, grads, 0.1, 0.0, 0.0);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      for (std::size_t j = 0; j < m.params[i].numel(); ++j) {
        CHECK(n.params[i][j] == doctest::Approx(m.params[i][j] - 0.05).epsilon(1e-15));
      }
    }
  }
  SUBCASE("lr 0 leaves parameters unchanged") {
    ModelState n = m;
    sgd_step(n, grads, 0.0);
    CHECK(n.params == m.params);
  }
  SUBCASE("two momentum steps on a constant gradient move lr*g*(1 + 1.9)") {
    ModelState n = m;
    sgd_step(n, grads, 0.1, 0.9, 0.0);
    sgd_step(n, grads, 0.1, 0.9, 0.0);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      for (std::size_t j = 0; j < m.params[i].numel(); ++j) {
        CHECK(m.params[i][j] - n.params[i][j] == doctest::Approx(0.1 * 0.5 * 2.9).epsilon(1e-12));
      }
    }
  }
  SUBCASE("weight decay is added to the gradient") {
    ModelState n = m;
    sgd_step(n, grads, 0.1, 0.0, 1e-2);
    CHECK(n.params[0][0] == doctest::Approx(m.params[0][0] - 0.1 * (0.5 + 1e-2 * m.params[0][0])));
  }
  SUBCASE("non-finite gradients are rejected") {
    grads[0][0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(sgd_step(m, grads, 0.1), NumericalError);
  }
}

TEST_CASE("poly learning rate") {
  CHECK(poly_lr(0.1, 0, 100) == 0.1);
  CHECK(poly_lr(0.1, 100, 100) == 0.0);
  CHECK(poly_lr(0.1, 50, 100) == doctest::Approx(0.025));
  CHECK_THROWS(poly_lr(0.1, 0, 0));
}

TEST_CASE("one small step lowers the loss of its example") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelState m = init_model(small_arch(4), seed);
    Rng rng(100 + seed);
    const Tensor image = random_tensor({3, 12, 12}, rng, 0, 1);
    const LabelMask target = random_mask(12, 12, 4, rng, 0.2);
    const double before = example_loss(m, image, target);
    Tape tape;
    std::vector<Var> params;
    Var loss = cross_entropy(forward(tape, m, tape.constant(image), params), target);
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (const Var& p : params) grads.push_back(p.grad());
    sgd_step(m, grads, 1e-3);
    CHECK(example_loss(m, image, target) < before);
  }
}

TEST_CASE("checkpoint round trip is bit-identical") {
  ArchConfig arch = small_arch(6);
  arch.decoder_kernel = 3;
  ModelState m = init_model(arch, 6);
  std::vector<Tensor> grads;
  for (const Tensor& p : m.params) grads.emplace_back(p.shape(), 0.25);
  sgd_step(m, grads, 0.01);

  std::stringstream buf;
  save_checkpoint(buf, m);
  const ModelState back = load_checkpoint(buf);
  CHECK(back.arch == m.arch);
  CHECK(back.params == m.params);
  CHECK(back.momentum == m.momentum);
  Rng rng(6);
  const Tensor x = random_tensor({3, 16, 16}, rng, 0, 1);
  CHECK(predict_logits(back, x) == predict_logits(m, x));

  std::stringstream again;
  save_checkpoint(again, back);
  CHECK(again.str() == buf.str());
}

TEST_CASE("corrupt checkpoints are rejected") {
  std::stringstream buf;
  save_checkpoint(buf, init_model(small_arch(2), 1));
  std::string bytes = buf.str();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream a(bad_magic);
  CHECK_THROWS_AS(load_checkpoint(a), DataError);

  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(truncated), DataError);
}
