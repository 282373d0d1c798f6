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

#include <algorithm>
#include <doctest.h>

#include "c2f/coarsify.hpp"
#include "c2f/pseudolabel.hpp"
#include "support.hpp"

using namespace c2f;
using c2f::testing::random_mask;
using c2f::testing::random_tensor;

namespace {

// Pixelwise linear model: logits depend only on the pixel's own colour, so it
// commutes with flips.
LogitsFn pointwise_model(const Tensor& weights) {
  return [weights](const Tensor& x) {
    const std::size_t classes = weights.dim(0), plane = x.dim(1) * x.dim(2);
    Tensor out({classes, x.dim(1), x.dim(2)});
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        double v = 0.0;
        for (std::size_t k = 0; k < 3; ++k) v += weights[c * 3 + k] * x[k * plane + p];
        out[c * plane + p] = v;
      }
    }
    return out;
  };
}

// Per-pixel reference for fuse.
LabelMask brute_fuse(const Tensor& prob, const std::vector<LabelMask>& stack, double threshold) {
  const std::size_t C = prob.dim(0), H = prob.dim(1), W = prob.dim(2);
  LabelMask out(static_cast<int>(H), static_cast<int>(W), kIgnore);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t p = y * W + x;
      bool agree = true;
      for (const LabelMask& m : stack) agree = agree && m.labels[p] == stack[0].labels[p];
      std::size_t best = 0;
      for (std::size_t c = 0; c < C; ++c) {
        if (prob.at(c, y, x) > prob.at(best, y, x)) best = c;
      }
      if (agree && prob.at(best, y, x) > threshold) out.labels[p] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

Tensor one_pixel_probs(std::vector<double> p) {
  const std::size_t c = p.size();
  return Tensor({c, 1, 1}, std::move(p));
}

std::vector<LabelMask> stack_of(std::vector<std::uint8_t> labels) {
  std::vector<LabelMask> out;
  for (auto l : labels) out.push_back(LabelMask(1, 1, l));
  return out;
}

}  // namespace

TEST_CASE("a spatially constant model gives identical maps") {
  const LogitsFn constant = [](const Tensor& x) {
    Tensor out({3, x.dim(1), x.dim(2)});
    for (std::size_t p = 0; p < x.dim(1) * x.dim(2); ++p) {
      out[p] = 0.2;
      out[x.dim(1) * x.dim(2) + p] = 1.1;
      out[2 * x.dim(1) * x.dim(2) + p] = -0.4;
    }
    return out;
  };
  Rng rng(1);
  const Tensor image = random_tensor({3, 8, 8}, rng, 0, 1);
  const TtaPrediction pred = tta_predict(constant, image, TtaConfig{});
  REQUIRE(pred.argmax_stack.size() == 6);
  for (const LabelMask& m : pred.argmax_stack) CHECK(m == pred.argmax_stack[0]);
  const Tensor single = softmax(Tensor({3, 1, 1}, {0.2, 1.1, -0.4}));
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < 64; ++p) CHECK(pred.prob_avg[c * 64 + p] == doctest::Approx(single[c]).epsilon(1e-14));
  }
}

TEST_CASE("flip combos agree with identity combos on a mirror-symmetric image") {
  Rng rng(2);
  Tensor image = random_tensor({3, 8, 8}, rng, 0, 1);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 4; x < 8; ++x) image.at(c, y, x) = image.at(c, y, 7 - x);
    }
  }
  const TtaConfig cfg;
  const TtaPrediction pred = tta_predict(pointwise_model(random_tensor({4, 3}, rng)), image, cfg);
  const std::size_t n = cfg.scales.size();
  for (std::size_t s = 0; s < n; ++s) CHECK(pred.argmax_stack[s] == pred.argmax_stack[n + s]);
}

TEST_CASE("prob_avg is the average of independently aligned maps") {
  Rng rng(3);
  const Tensor image = random_tensor({3, 10, 8}, rng, 0, 1);
  const LogitsFn model = [](const Tensor& x) {
    // Not flip-equivariant: mixes in the column index.
    Tensor out({2, x.dim(1), x.dim(2)});
    for (std::size_t y = 0; y < x.dim(1); ++y) {
      for (std::size_t c = 0; c < x.dim(2); ++c) {
        out.at(0, y, c) = x.at(0, y, c) * 3.0 + 0.1 * static_cast<double>(c);
        out.at(1, y, c) = x.at(1, y, c) * 2.0 - 0.05 * static_cast<double>(y);
      }
    }
    return out;
  };
  TtaConfig cfg;
  const TtaPrediction pred = tta_predict(model, image, cfg);
  Tensor want({2, 10, 8}, 0.0);
  for (bool flip : {false, true}) {
    for (double s : {0.5, 1.0, 2.0}) {
      Tensor x = flip ? hflip(image) : image;
      Tensor p = bilinear_resize(softmax(model(bilinear_resize(x, s))), 10, 8);
      if (flip) p = hflip(p);
      for (std::size_t i = 0; i < p.numel(); ++i) want[i] += p[i] / 6.0;
    }
  }
  for (std::size_t i = 0; i < want.numel(); ++i) CHECK(pred.prob_avg[i] == doctest::Approx(want[i]).epsilon(1e-13));

  cfg.combine = TtaCombine::kMeanLogit;
  const TtaPrediction logit = tta_predict(model, image, cfg);
  double s = 0.0;
  for (std::size_t c = 0; c < 2; ++c) s += logit.prob_avg[c * 80];
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("tta_predict rejects non-finite model output") {
  const LogitsFn broken = [](const Tensor& x) {
    return Tensor({2, x.dim(1), x.dim(2)}, std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_AS(tta_predict(broken, Tensor({3, 8, 8}, 0.5), TtaConfig{}), NumericalError);
}

TEST_CASE("fuse gates") {
  const TtaConfig cfg;
  SUBCASE("agreement and confidence pass") {
    CHECK(fuse(one_pixel_probs({0.95, 0.05}), stack_of({0, 0, 0, 0, 0, 0}), cfg).labels[0] == 0);
  }
  SUBCASE("5 of 6 agreeing is rejected") {
    CHECK(fuse(one_pixel_probs({0.99, 0.01}), stack_of({0, 0, 0, 0, 0, 1}), cfg).labels[0] == kIgnore);
  }
  SUBCASE("confidence exactly at the threshold is rejected") {
    CHECK(fuse(one_pixel_probs({0.9, 0.1}), stack_of({0, 0, 0, 0, 0, 0}), cfg).labels[0] == kIgnore);
  }
  SUBCASE("provenance follows the result") {
    const LabelMask m = fuse(one_pixel_probs({0.05, 0.95}), stack_of({1, 1, 1, 1, 1, 1}), cfg);
    CHECK(m.labels[0] == 1);
    CHECK(m.provenance[0] == Provenance::kPseudo);
  }
}

TEST_CASE("fuse matches a brute-force check on random stacks") {
  Rng rng(4);
  const TtaConfig cfg;
  for (int i = 0; i < 100; ++i) {
    Tensor logits = random_tensor({4, 16, 16}, rng, -6, 6);
    const Tensor prob = softmax(logits);
    std::vector<LabelMask> stack;
    const LabelMask base = argmax_labels(prob);
    std::bernoulli_distribution flip(0.05);
    for (int k = 0; k < 6; ++k) {
      LabelMask m = base;
      for (auto& l : m.labels) {
        if (flip(rng)) l = static_cast<std::uint8_t>((l + 1) % 4);
      }
      stack.push_back(m);
    }
    const LabelMask got = fuse(prob, stack, cfg);
    CHECK(got.labels == brute_fuse(prob, stack, cfg.confidence_threshold).labels);
  }
}

TEST_CASE("raising the threshold never accepts more") {
  Rng rng(5);
  const Tensor prob = softmax(random_tensor({3, 16, 16}, rng, -5, 5));
  const std::vector<LabelMask> stack(6, argmax_labels(prob));
  double previous = 1.0;
  for (double t : {0.3, 0.5, 0.7, 0.9, 0.95, 0.99}) {
    TtaConfig cfg;
    cfg.confidence_threshold = t;
    const double f = labeled_fraction(fuse(prob, stack, cfg));
    CHECK(f <= previous);
    previous = f;
  }
}

TEST_CASE("merge keeps manual labels and replaces earlier pseudo labels") {
  Rng rng(6);
  LabelMask coarse = random_mask(8, 8, 4, rng, 0.5);
  coarse.mark_manual();

  SUBCASE("all-IGNORE pseudo is a no-op") {
    LabelMask pseudo(8, 8, kIgnore);
    CHECK(merge(coarse, pseudo) == coarse);
  }
  SUBCASE("dense coarse wins") {
    LabelMask dense = random_mask(8, 8, 4, rng);
    dense.mark_manual();
    CHECK(merge(dense, random_mask(8, 8, 4, rng, 0.3)) == dense);
  }
  SUBCASE("second iteration overwrites the first, never the manual labels") {
    const LabelMask p1 = random_mask(8, 8, 4, rng, 0.3);
    const LabelMask p2 = random_mask(8, 8, 4, rng, 0.3);
    const LabelMask m1 = merge(coarse, p1);
    const LabelMask m2 = merge(m1, p2);
    for (std::size_t p = 0; p < coarse.size(); ++p) {
      if (coarse.provenance[p] == Provenance::kManual) {
        CHECK(m2.labels[p] == coarse.labels[p]);
        CHECK(m2.provenance[p] == Provenance::kManual);
      } else if (p2.labels[p] != kIgnore) {
        CHECK(m2.labels[p] == p2.labels[p]);
        CHECK(m2.provenance[p] == Provenance::kPseudo);
      } else {
        CHECK(m2.labels[p] == m1.labels[p]);
        CHECK(m2.provenance[p] == m1.provenance[p]);
      }
    }
  }
  SUBCASE("labelled fraction never decreases") {
    LabelMask m = coarse;
    for (int i = 0; i < 10; ++i) {
      const LabelMask next = merge(m, random_mask(8, 8, 4, rng, 0.7));
      CHECK(std::count(next.labels.begin(), next.labels.end(), kIgnore) <=
            std::count(m.labels.begin(), m.labels.end(), kIgnore));
      m = next;
    }
  }
  SUBCASE("missing provenance is an error") {
    LabelMask bare = coarse;
    bare.provenance.clear();
    CHECK_THROWS_AS(merge(bare, coarse), DataError);
  }
}

TEST_CASE("tta config validation") {
  TtaConfig cfg;
  cfg.confidence_threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = TtaConfig{};
  cfg.scales.clear();
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}
