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
#include <set>
#include <sstream>

#include "c2f/pipeline.hpp"
#include "support.hpp"

using namespace c2f;
using c2f::testing::random_mask;

namespace {

ExperimentConfig tiny_config(std::uint64_t seed = 1) {
  ExperimentConfig cfg;
  cfg.scene.height = cfg.scene.width = 32;
  cfg.arch.channels = {4, 8, 8};
  cfg.n_coarse = 6;
  cfg.n_synthetic = 4;
  cfg.n_val = 3;
  cfg.iterations = 0;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = seed;
  return cfg;
}

// Naive confusion count: one pass per (truth, prediction) pair.
std::uint64_t tally(const std::vector<LabelMask>& truth, const std::vector<LabelMask>& pred, int t, int p) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t q = 0; q < truth[i].size(); ++q) n += truth[i].labels[q] == t && pred[i].labels[q] == p;
  }
  return n;
}

}  // namespace

TEST_CASE("annotation budget") {
  CHECK(std::abs(budget(8000, 0).hours - 933.3) < 0.05);
  CHECK(budget(0, 2975).hours == 4462.5);
  CHECK(budget(0, 0).hours == 0.0);
  CHECK(budget(0, 60, FineCostModel::kBdd).hours == 75.0);
  CHECK(budget(0, 0, FineCostModel::kCityscapes, 500).hours == 0.0);
  // Disjoint compositions add up.
  CHECK(budget(30, 7).hours == doctest::Approx(budget(10, 3).hours + budget(20, 4).hours));
  CHECK_THROWS(budget(-1, 0));
}

TEST_CASE("confusion matrix equals a per-pixel tally") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabelMask> truth, pred;
    ConfusionMatrix cm(5);
    for (int i = 0; i < 3; ++i) {
      truth.push_back(random_mask(16, 16, 5, rng, 0.1));
      pred.push_back(random_mask(16, 16, 5, rng));
      cm.add(truth.back(), pred.back());
    }
    for (int t = 0; t < 5; ++t) {
      for (int p = 0; p < 5; ++p) CHECK(cm.at(t, p) == tally(truth, pred, t, p));
    }
  }
}

TEST_CASE("mIoU closed forms") {
  Rng rng(2);
  const LabelMask gt = random_mask(8, 8, 4, rng);
  ConfusionMatrix perfect(4);
  perfect.add(gt, gt);
  CHECK(perfect.mean_iou() == 1.0);

  LabelMask balanced(4, 4, 0);
  for (std::size_t p = 8; p < 16; ++p) balanced.labels[p] = 1;
  ConfusionMatrix constant(2);
  constant.add(balanced, LabelMask(4, 4, 0));
  CHECK(constant.iou()[0] == 0.5);
  CHECK(constant.iou()[1] == 0.0);
  CHECK(constant.mean_iou() == 0.25);
}

TEST_CASE("absent classes are left out of the mean") {
  LabelMask gt(2, 2, 0), pred(2, 2, 0);
  gt.labels = {0, 0, 1, 1};
  pred.labels = {0, 0, 1, 0};
  ConfusionMatrix cm(5);
  cm.add(gt, pred);
  const auto present = cm.present();
  CHECK(present == std::vector<bool>{true, true, false, false, false});
  CHECK(cm.mean_iou() == doctest::Approx((2.0 / 3.0 + 0.5) / 2.0));
}

TEST_CASE("IGNORE ground truth is skipped") {
  LabelMask gt(1, 3, kIgnore), pred(1, 3, 1);
  gt.labels[0] = 1;
  ConfusionMatrix cm(2);
  cm.add(gt, pred);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(0, 1) == 0);
}

TEST_CASE("permuting class ids permutes IoU and keeps mIoU") {
  Rng rng(3);
  const std::vector<std::uint8_t> perm = {2, 0, 3, 1};
  ConfusionMatrix a(4), b(4);
  for (int i = 0; i < 3; ++i) {
    LabelMask t = random_mask(8, 8, 4, rng), p = random_mask(8, 8, 4, rng);
    a.add(t, p);
    for (auto& l : t.labels) l = perm[l];
    for (auto& l : p.labels) l = perm[l];
    b.add(t, p);
  }
  for (int c = 0; c < 4; ++c) CHECK(b.iou()[perm[c]] == a.iou()[c]);
  CHECK(b.mean_iou() == doctest::Approx(a.mean_iou()).epsilon(1e-15));
}

TEST_CASE("build_data shapes the experiment") {
  ExperimentConfig cfg = tiny_config();
  cfg.n_fine = 8;
  const ExperimentData d = build_data(cfg);
  CHECK(d.coarse.items.size() == 6);
  CHECK(d.fine.items.size() == 8);
  CHECK(d.synthetic.items.size() == 4);
  CHECK(d.val.items.size() == 3);
  // Coarse and fine annotate the same scenes.
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(d.coarse.items[i].image == d.fine.items[i].image);
    CHECK(d.coarse.items[i].domain == Domain::kRealCoarse);
    CHECK(d.coarse.items[i].label.has_ignore());
  }
  std::set<std::string> train_ids;
  for (const Sample& s : d.fine.items) train_ids.insert(s.id);
  for (const Sample& s : d.val.items) {
    CHECK(train_ids.count(s.id) == 0);
    for (const Sample& t : d.fine.items) CHECK(s.image != t.image);
  }
}

TEST_CASE("training without synthetic data is coarse-only cross entropy") {
  ExperimentConfig cfg = tiny_config();
  cfg.n_synthetic = 0;
  const ExperimentData d = build_data(cfg);
  const TrainResult r = pretrain(cfg, d);
  REQUIRE(r.log.size() == 2);
  for (const EpochLog& e : r.log) {
    CHECK(e.boundary == 0.0);
    CHECK(e.loss == doctest::Approx(e.cross_entropy));
  }
}

TEST_CASE("training loss falls over five epochs") {
  int falling = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg = tiny_config(seed);
    cfg.n_coarse = 6;
    cfg.n_synthetic = 4;
    cfg.epochs = 5;
    const TrainResult r = pretrain(cfg, build_data(cfg));
    falling += r.log.back().loss < r.log.front().loss;
  }
  CHECK(falling >= 3);
}

TEST_CASE("training is deterministic down to checkpoint bytes") {
  const ExperimentConfig cfg = tiny_config(4);
  const ExperimentData d = build_data(cfg);
  std::stringstream a, b;
  save_checkpoint(a, pretrain(cfg, d).model);
  save_checkpoint(b, pretrain(cfg, d).model);
  CHECK(a.str() == b.str());
}

TEST_CASE("min_steps stretches short rounds") {
  ExperimentConfig cfg = tiny_config();
  cfg.min_steps = 20;
  const ExperimentData d = build_data(cfg);
  // 10 items at batch 4 are 3 steps per epoch, so 7 epochs reach 20 steps.
  CHECK(pretrain(cfg, d).log.size() == 7);
}

TEST_CASE("self-training keeps manual labels and grows coverage") {
  ExperimentConfig cfg = tiny_config(2);
  cfg.iterations = 2;
  cfg.tta.confidence_threshold = 0.5;
  const ExperimentData d = build_data(cfg);
  const auto results = self_train(cfg, d);
  REQUIRE(results.size() == 3);
  for (std::size_t i = 0; i < d.coarse.items.size(); ++i) {
    const LabelMask& manual = d.coarse.items[i].label;
    double previous = 0.0;
    for (const IterationResult& r : results) {
      const LabelMask& now = r.coarse.items[i].label;
      for (std::size_t p = 0; p < manual.size(); ++p) {
        if (manual.labels[p] != kIgnore) CHECK(now.labels[p] == manual.labels[p]);
      }
      double f = 0.0;
      for (auto l : now.labels) f += l != kIgnore;
      CHECK(f >= previous);
      previous = f;
    }
  }
  for (std::size_t r = 0; r < results.size(); ++r) CHECK(results[r].report.iteration == static_cast<int>(r));
}

TEST_CASE("zero iterations returns the pre-trained model only") {
  const ExperimentConfig cfg = tiny_config(3);
  const auto results = self_train(cfg, build_data(cfg));
  CHECK(results.size() == 1);
}

TEST_CASE("sampling runs grow nested sets") {
  ExperimentConfig cfg = tiny_config(5);
  cfg.n_coarse = cfg.n_fine = 12;
  cfg.epochs = 1;
  const ExperimentData d = build_data(cfg);
  for (auto mode : {SamplingMode::kModelBased, SamplingMode::kUniform}) {
    const SamplingRun run = sampling_run(cfg, d, mode, 2, 3, 3);
    REQUIRE(run.steps.size() == 4);
    for (std::size_t s = 1; s < run.steps.size(); ++s) {
      const auto& prev = run.steps[s - 1].chosen;
      const auto& now = run.steps[s].chosen;
      CHECK(now.size() == prev.size() + 3);
      CHECK(std::equal(prev.begin(), prev.end(), now.begin()));
      CHECK(run.steps[s].min_coverage >= run.steps[s - 1].min_coverage);
    }
  }
}

TEST_CASE("budget sweep emits one row per method and nests image sets") {
  ExperimentConfig cfg = tiny_config(6);
  cfg.epochs = 1;
  const auto one = budget_sweep(cfg, {{4, 1}});
  REQUIRE(one.size() == 2);
  CHECK(one[0].method == "ours");
  CHECK(one[1].method == "fine-only");
  CHECK(one[0].budget_hours == doctest::Approx(4 * 7.0 / 60.0));
  CHECK(one[1].budget_hours == 1.5);

  const auto rows = budget_sweep(cfg, {{2, 1}, {5, 2}});
  REQUIRE(rows.size() == 4);
  for (std::size_t m = 0; m < 2; ++m) {
    const auto& small = rows[m].ids;
    const auto& large = rows[2 + m].ids;
    CHECK(small.size() == static_cast<std::size_t>(rows[m].images));
    for (const auto& id : small) CHECK(std::find(large.begin(), large.end(), id) != large.end());
  }
  const auto repeated = budget_sweep(cfg, {{2, 1}, {2, 2}});
  CHECK(repeated[0].miou == repeated[2].miou);
  CHECK(repeated[0].ids == repeated[2].ids);

  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  CHECK(csv.str().rfind("budget_hours,method,miou,images\n", 0) == 0);
}

TEST_CASE("report CSV layout") {
  EvalReport r;
  r.iteration = 2;
  r.iou = {0.5, 0.0, 1.0};
  r.present = {true, false, true};
  r.miou = 0.75;
  r.budget_hours = 7.0;
  std::ostringstream out;
  write_report_header(out, 3);
  write_report_row(out, r);
  CHECK(out.str() ==
        "iteration,class_0,class_1,class_2,miou,budget_hours\n"
        "2,0.500000,nan,1.000000,0.750000,7.000000\n");
}

TEST_CASE("label flips mirror provenance too") {
  LabelMask m(1, 3, 0);
  m.labels = {1, 2, kIgnore};
  m.mark_manual();
  const LabelMask f = hflip(m);
  CHECK(f.labels == std::vector<std::uint8_t>{kIgnore, 2, 1});
  CHECK(f.provenance[0] == Provenance::kIgnore);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg = tiny_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = tiny_config();
  cfg.arch.num_classes = 5;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}
