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

#include "c2f/augment.hpp"
#include "c2f/datagen.hpp"
#include "support.hpp"

using namespace c2f;
using c2f::testing::random_mask;
using c2f::testing::random_tensor;

namespace {

Sample make_sample(const std::string& id, Domain domain, Rng& rng, double p_ignore) {
  Sample s;
  s.id = id;
  s.domain = domain;
  s.image = random_tensor({3, 6, 5}, rng, 0.0, 1.0);
  s.label = random_mask(6, 5, 4, rng, p_ignore);
  s.label.mark_manual();
  return s;
}

BinaryMask checkerboard(int h, int w) {
  BinaryMask m{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.bits[static_cast<std::size_t>(y) * w + x] = (x + y) % 2;
  }
  return m;
}

}  // namespace

TEST_CASE("paste mask extremes") {
  Rng rng(1);
  const LabelMask label = random_mask(8, 8, 5, rng);
  AugmentConfig cfg;
  cfg.p_class = 1.0;
  CHECK(build_paste_mask(label, cfg, rng).all(1));
  cfg.p_class = 0.0;
  CHECK(build_paste_mask(label, cfg, rng).all(0));
}

TEST_CASE("paste mask selects whole classes") {
  Rng rng(2);
  const LabelMask label = random_mask(10, 10, 6, rng);
  AugmentConfig cfg;
  for (int i = 0; i < 50; ++i) {
    const BinaryMask m = build_paste_mask(label, cfg, rng);
    std::vector<int> state(6, -1);
    for (std::size_t p = 0; p < label.size(); ++p) {
      int& s = state[label.labels[p]];
      if (s == -1) s = m.bits[p];
      CHECK(s == m.bits[p]);
    }
  }
}

TEST_CASE("single-class paste frequency is p_class") {
  const LabelMask label(8, 8, 2);
  AugmentConfig cfg;
  Rng rng(3);
  int all_ones = 0;
  for (int i = 0; i < 10000; ++i) all_ones += build_paste_mask(label, cfg, rng).all(1);
  CHECK(all_ones >= 4850);
  CHECK(all_ones <= 5150);
}

TEST_CASE("mix with constant masks returns one source") {
  Rng rng(4);
  const Sample real = make_sample("real/0", Domain::kRealCoarse, rng, 0.4);
  const Sample syn = make_sample("synthetic/0", Domain::kSynthetic, rng, 0.0);
  BinaryMask zeros{6, 5, std::vector<std::uint8_t>(30, 0)};
  const Sample a = mix(real, syn, zeros);
  CHECK(a.image == real.image);
  CHECK(a.label == real.label);
  CHECK(a.augmented);
  CHECK(a.id == "real/0+aug");
  const Sample b = mix(real, syn, zeros.inverted());
  CHECK(b.image == syn.image);
  CHECK(b.label == syn.label);
}

TEST_CASE("mix takes each pixel from exactly one source") {
  Rng rng(5);
  const Sample real = make_sample("real/1", Domain::kRealCoarse, rng, 0.4);
  const Sample syn = make_sample("synthetic/1", Domain::kSynthetic, rng, 0.0);
  const BinaryMask m = checkerboard(6, 5);
  const Sample out = mix(real, syn, m);
  for (std::size_t p = 0; p < 30; ++p) {
    const Sample& src = m.bits[p] ? syn : real;
    CHECK(out.label.labels[p] == src.label.labels[p]);
    CHECK(out.label.provenance[p] == src.label.provenance[p]);
    for (std::size_t c = 0; c < 3; ++c) CHECK(out.image[c * 30 + p] == src.image[c * 30 + p]);
    if (m.bits[p]) CHECK(out.label.labels[p] != kIgnore);
  }
}

TEST_CASE("mask polarity round trip") {
  Rng rng(6);
  const Sample a = make_sample("real/2", Domain::kRealCoarse, rng, 0.0);
  const Sample b = make_sample("synthetic/2", Domain::kSynthetic, rng, 0.0);
  const BinaryMask m = checkerboard(6, 5);
  const Sample x = mix(a, b, m), y = mix(b, a, m.inverted());
  CHECK(x.image == y.image);
  CHECK(x.label.labels == y.label.labels);
}

TEST_CASE("mix rejects mismatched shapes") {
  Rng rng(7);
  const Sample a = make_sample("real/3", Domain::kRealCoarse, rng, 0.0);
  const Sample b = make_sample("synthetic/3", Domain::kSynthetic, rng, 0.0);
  CHECK_THROWS(mix(a, b, BinaryMask{3, 3, std::vector<std::uint8_t>(9, 0)}));
}

TEST_CASE("fit_to crops and pads around the centre") {
  Rng rng(8);
  const Sample s = make_sample("synthetic/4", Domain::kSynthetic, rng, 0.0);
  const Sample padded = fit_to(s, 8, 7);
  CHECK(padded.image.shape() == Shape{3, 8, 7});
  CHECK(padded.label.at(0, 0) == kIgnore);
  CHECK(padded.label.at(1, 1) == s.label.at(0, 0));
  const Sample cropped = fit_to(s, 4, 3);
  CHECK(cropped.label.at(0, 0) == s.label.at(1, 1));
}

TEST_CASE("augment_batch adds twins and keeps originals") {
  Rng rng(9);
  std::vector<Sample> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(make_sample("real/" + std::to_string(i), Domain::kRealCoarse, rng, 0.4));
  batch.push_back(make_sample("synthetic/9", Domain::kSynthetic, rng, 0.0));
  SceneDataset pool{4, {make_sample("synthetic/0", Domain::kSynthetic, rng, 0.0)}};

  AugmentConfig cfg;
  cfg.p_select_real = 0.0;
  Rng r0(1);
  CHECK(augment_batch(batch, pool, cfg, r0) == batch);

  cfg.p_select_real = 1.0;
  cfg.p_class = 1.0;
  Rng r1(1);
  const auto out = augment_batch(batch, pool, cfg, r1);
  REQUIRE(out.size() == batch.size() + 4);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(out[i] == batch[i]);
  for (std::size_t i = batch.size(); i < out.size(); ++i) {
    CHECK(out[i].augmented);
    CHECK(out[i].image == pool.items[0].image);
  }

  cfg = AugmentConfig{};
  Rng r2(42), r3(42);
  CHECK(augment_batch(batch, pool, cfg, r2) == augment_batch(batch, pool, cfg, r3));
  CHECK_THROWS(augment_batch(batch, SceneDataset{4, {}}, cfg, r2));
}
