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

#include <algorithm>
#include <map>
#include <set>

#include "c2f/sampler.hpp"
#include "support.hpp"

using namespace c2f;

namespace {

SamplerState state_with(const ClassPresence& presence) {
  SamplerState s = SamplerState::fresh(presence.size());
  s.presence = presence;
  return s;
}

// Straight re-statement of the selection rule: repeat rounds; in each round
// visit classes by ascending coverage (ties: lower class id) and take the
// unchosen image with the largest positive presence (ties: lower index).
std::vector<std::size_t> reference_select(const ClassPresence& P, std::vector<std::size_t> chosen, std::size_t k) {
  const std::size_t C = P[0].size();
  std::vector<bool> taken(P.size(), false);
  for (auto i : chosen) taken[i] = true;
  std::vector<std::size_t> picked;
  while (picked.size() < k) {
    std::vector<double> cov(C, 0.0);
    for (std::size_t i = 0; i < P.size(); ++i) {
      if (taken[i]) {
        for (std::size_t c = 0; c < C; ++c) cov[c] += P[i][c];
      }
    }
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t c = 0; c < C; ++c) order.push_back({cov[c], c});
    std::sort(order.begin(), order.end());
    bool any = false;
    for (auto [unused, c] : order) {
      if (picked.size() == k) break;
      std::size_t best = P.size();
      for (std::size_t i = 0; i < P.size(); ++i) {
        if (!taken[i] && P[i][c] > 0 && (best == P.size() || P[i][c] > P[best][c])) best = i;
      }
      if (best == P.size()) continue;
      taken[best] = true;
      picked.push_back(best);
      any = true;
    }
    if (!any) {
      for (std::size_t i = 0; i < P.size(); ++i) {
        if (!taken[i]) {
          taken[i] = true;
          picked.push_back(i);
          break;
        }
      }
    }
  }
  return picked;
}

}  // namespace

TEST_CASE("the only image with a tail class is chosen in the first round") {
  // 10 images, 3 classes; class 2 appears only in image 7.
  ClassPresence P(10, std::vector<double>{50, 10, 0});
  for (std::size_t i = 0; i < 10; ++i) P[i][1] = 5.0 + static_cast<double>(i % 3);
  P[7][2] = 3.0;
  SamplerState s = state_with(P);
  s.chosen = {0};
  s.pool.erase(s.pool.begin());
  const auto picked = select_next(s, 3);
  CHECK(picked.front() == 7);
  CHECK(picked == reference_select(P, {0}, 3));
}

TEST_CASE("selection matches the reference rule on random small pools") {
  Rng rng(1);
  std::uniform_int_distribution<int> count(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    ClassPresence P(10, std::vector<double>(3));
    for (auto& row : P) {
      for (double& v : row) v = count(rng) == 0 ? 0.0 : count(rng);
    }
    SamplerState s = state_with(P);
    const std::size_t k = 1 + trial % 10;
    CHECK(select_next(s, k) == reference_select(P, {}, k));
  }
}

TEST_CASE("k equal to the pool takes everything") {
  ClassPresence P(6, std::vector<double>{1, 2});
  SamplerState s = state_with(P);
  auto picked = select_next(s, 6);
  std::sort(picked.begin(), picked.end());
  CHECK(picked == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(s.pool.empty());
}

TEST_CASE("identical rows select the lowest indices") {
  ClassPresence P(8, std::vector<double>{4, 4, 4});
  SamplerState s = state_with(P);
  auto picked = select_next(s, 3);
  std::sort(picked.begin(), picked.end());
  CHECK(picked == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("too many requested is an error") {
  SamplerState s = state_with(ClassPresence(3, std::vector<double>{1}));
  CHECK_THROWS(select_next(s, 4));
  Rng rng(1);
  CHECK_THROWS(uniform_select(s, 4, rng));
}

TEST_CASE("chosen and pool stay disjoint and grow incrementally") {
  Rng rng(2);
  ClassPresence P(30, std::vector<double>(4));
  std::uniform_real_distribution<double> u(0, 10);
  for (auto& row : P) {
    for (double& v : row) v = u(rng);
  }
  SamplerState s = state_with(P);
  std::vector<std::size_t> before;
  for (int step = 0; step < 4; ++step) {
    select_next(s, 5);
    CHECK(std::equal(before.begin(), before.end(), s.chosen.begin()));
    before = s.chosen;
    std::set<std::size_t> a(s.chosen.begin(), s.chosen.end()), b(s.pool.begin(), s.pool.end());
    CHECK(a.size() == s.chosen.size());
    for (auto i : a) CHECK(b.count(i) == 0);
    CHECK(a.size() + b.size() == 30);
    CHECK(std::is_sorted(s.pool.begin(), s.pool.end()));
  }
}

TEST_CASE("each pick is the best single choice for its class") {
  // With k = 1 the pick targets the least-covered class; no other pool image
  // would raise that class's coverage more.
  Rng rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  for (int trial = 0; trial < 50; ++trial) {
    ClassPresence P(12, std::vector<double>(3));
    for (auto& row : P) {
      for (double& v : row) v = u(rng);
    }
    SamplerState s = state_with(P);
    select_next(s, 2);
    const auto cov = s.coverage();
    const std::size_t target = std::min_element(cov.begin(), cov.end()) - cov.begin();
    const auto pool_before = s.pool;
    const auto pick = select_next(s, 1).front();
    for (auto i : pool_before) CHECK(P[i][target] <= P[pick][target]);
  }
}

TEST_CASE("uniform selection is reproducible and uniform") {
  Rng a(7), b(7);
  SamplerState s1 = SamplerState::fresh(20), s2 = SamplerState::fresh(20);
  CHECK(uniform_select(s1, 5, a) == uniform_select(s2, 5, b));

  Rng rng(8);
  std::map<std::size_t, int> freq;
  for (int i = 0; i < 10000; ++i) {
    SamplerState s = SamplerState::fresh(10);
    ++freq[uniform_select(s, 1, rng).front()];
  }
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(freq[i] >= 900);
    CHECK(freq[i] <= 1100);
  }
  SamplerState all = SamplerState::fresh(6);
  auto picked = uniform_select(all, 6, rng);
  std::sort(picked.begin(), picked.end());
  CHECK(picked == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("label distribution and binarize") {
  SceneDataset d{3, {}};
  Sample s;
  s.label = LabelMask(2, 2, 0);
  s.label.labels = {0, 2, kIgnore, 2};
  d.items.push_back(s);
  const auto P = label_distribution(d);
  CHECK(P[0] == std::vector<double>{1, 0, 2});
  CHECK(binarize(P)[0] == std::vector<double>{1, 0, 1});
}
