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

#include "c2f/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace c2f {
namespace {

constexpr std::uint64_t kValIndexOffset = 1'000'000;
constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kSamplingStream = 0x73616d70;
constexpr std::uint64_t kSweepStream = 0x73776570;

Sample flipped(const Sample& s) {
  Sample out = s;
  out.image = hflip(s.image);
  out.label = hflip(s.label);
  return out;
}

}  // namespace

double fine_minutes(FineCostModel model) {
  return model == FineCostModel::kBdd ? kFineMinutesBdd : kFineMinutesCityscapes;
}

void ExperimentConfig::validate() const {
  scene.validate();
  if (n_coarse < 0 || n_fine < 0 || n_synthetic < 0 || n_val < 0) {
    throw UsageError("experiment image counts must be >= 0");
  }
  if (n_coarse + n_fine + n_synthetic == 0) throw UsageError("no labelled training data configured");
  if (iterations < 0) throw UsageError("experiment.iterations must be >= 0");
  if (epochs < 1) throw UsageError("experiment.epochs must be >= 1");
  if (min_steps < 0) throw UsageError("experiment.min_steps must be >= 0");
  if (batch_size < 1) throw UsageError("experiment.batch_size must be >= 1");
  if (!(base_lr >= 0.0)) throw UsageError("experiment.base_lr must be >= 0");
  if (eval_scales.empty()) throw UsageError("experiment.eval_scales must be non-empty");
  if (arch.num_classes != scene.num_classes) {
    throw UsageError("model.num_classes must equal scene.num_classes");
  }
  loss.validate();
  augment.validate();
  tta.validate();
  coarse.validate();
}

ExperimentData build_data(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentData data;
  const int classes = cfg.scene.num_classes;
  data.coarse.num_classes = data.fine.num_classes = data.synthetic.num_classes =
      data.val.num_classes = classes;
  const int n_real = std::max(cfg.n_coarse, cfg.n_fine);
  const double fine_cost = fine_minutes(cfg.fine_cost);
  for (int i = 0; i < n_real; ++i) {
    Sample scene = generate_scene(cfg.scene, SceneDomain::kReal, static_cast<std::uint64_t>(i));
    if (i < cfg.n_coarse) {
      Sample coarse = scene;
      coarse.domain = Domain::kRealCoarse;
      coarse.label = coarsify(scene.label, cfg.coarse);
      coarse.annotation_minutes = kCoarseMinutes;
      data.coarse.items.push_back(std::move(coarse));
    }
    if (i < cfg.n_fine) {
      scene.annotation_minutes = fine_cost;
      data.fine.items.push_back(std::move(scene));
    }
  }
  for (int i = 0; i < cfg.n_synthetic; ++i) {
    data.synthetic.items.push_back(
        generate_scene(cfg.scene, SceneDomain::kSynthetic, static_cast<std::uint64_t>(i)));
  }
  for (int i = 0; i < cfg.n_val; ++i) {
    Sample scene = generate_scene(cfg.scene, SceneDomain::kReal, kValIndexOffset + i);
    scene.id = "val/" + std::to_string(i);
    data.val.items.push_back(std::move(scene));
  }
  return data;
}

TrainResult train(const ExperimentConfig& cfg, const std::vector<const Sample*>& real,
                  const SceneDataset& synthetic, int round, const ModelState* init) {
  std::vector<const Sample*> items = real;
  for (const Sample& s : synthetic.items) items.push_back(&s);
  if (items.empty()) throw UsageError("train: no training items");

  TrainResult result;
  // Every round starts from the same draw and sees the same batch order, so
  // rounds differ only in their labels.
  result.model = init ? *init : init_model(cfg.arch, derive_seed(cfg.seed, kInitStream, 0));
  if (init) {
    for (Tensor& m : result.model.momentum) m = Tensor(m.shape(), 0.0);
  }
  Rng rng(derive_seed(cfg.seed, kShuffleStream, 0));

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (items.size() + batch - 1) / batch;
  const std::size_t epochs = std::max<std::size_t>(
      cfg.epochs, (static_cast<std::size_t>(cfg.min_steps) + steps_per_epoch - 1) / steps_per_epoch);
  const std::size_t total_steps = epochs * steps_per_epoch;
  const bool augment = cfg.cross_domain_augment && !synthetic.items.empty();

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::bernoulli_distribution coin(0.5);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log{round, static_cast<int>(epoch + 1), 0.0, 0.0, 0.0};
    for (std::size_t start = 0; start < items.size(); start += batch) {
      std::vector<Sample> samples;
      for (std::size_t i = start; i < std::min(items.size(), start + batch); ++i) {
        samples.push_back(*items[order[i]]);
      }
      if (augment) samples = augment_batch(samples, synthetic, cfg.augment, rng);
      if (cfg.random_flip) {
        for (Sample& s : samples) {
          if (coin(rng)) s = flipped(s);
        }
      }

      const auto where = [&] {
        return "round " + std::to_string(round) + ", epoch " + std::to_string(epoch + 1) + ", step " +
               std::to_string(step);
      };
      try {
        Tape tape;
        std::vector<Var> params;
        std::vector<Tensor> noises(samples.size());
        std::vector<LossItem> loss_items;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          const Sample& s = samples[i];
          Var logits = forward(tape, result.model, tape.constant(s.image), params);
          LossItem item{logits, &s.label, s.domain, s.augmented, nullptr};
          if (s.domain == Domain::kSynthetic && !s.augmented && cfg.loss.lambda_bd != 0.0) {
            noises[i] = gumbel_noise(logits.value().shape(), rng);
            item.noise = &noises[i];
          }
          loss_items.push_back(item);
        }
        LossBreakdown loss = total_loss(loss_items, cfg.loss);
        const double value = loss.total.value()[0];
        if (!std::isfinite(value)) throw NumericalError("non-finite loss");
        tape.backward(loss.total);
        std::vector<Tensor> grads;
        for (const Var& p : params) grads.push_back(p.grad());
        const double lr = poly_lr(cfg.base_lr, step, total_steps, cfg.lr_power);
        sgd_step(result.model, grads, lr, cfg.momentum, cfg.weight_decay);
        ++step;
        log.loss += value;
        log.cross_entropy += loss.cross_entropy;
        log.boundary += loss.boundary;
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at " + where() + ": " + e.what());
      }
    }
    const double inv = 1.0 / static_cast<double>(steps_per_epoch);
    log.loss *= inv;
    log.cross_entropy *= inv;
    log.boundary *= inv;
    result.log.push_back(log);
  }
  return result;
}

TrainResult pretrain(const ExperimentConfig& cfg, const ExperimentData& data) {
  std::vector<const Sample*> real;
  for (const Sample& s : data.coarse.items) real.push_back(&s);
  for (const Sample& s : data.fine.items) real.push_back(&s);
  return train(cfg, real, data.synthetic, 0);
}

// ---- evaluation -------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

void ConfusionMatrix::add(const LabelMask& truth, const LabelMask& prediction) {
  if (truth.size() != prediction.size()) throw ShapeError("ConfusionMatrix: size mismatch");
  for (std::size_t p = 0; p < truth.size(); ++p) {
    const std::uint8_t t = truth.labels[p], q = prediction.labels[p];
    if (t == kIgnore) continue;
    if (t >= classes_ || q >= classes_) throw DataError("ConfusionMatrix: class id out of range");
    ++counts_[static_cast<std::size_t>(t) * classes_ + q];
  }
}

std::uint64_t ConfusionMatrix::at(int truth, int predicted) const {
  return counts_.at(static_cast<std::size_t>(truth) * classes_ + predicted);
}

std::vector<double> ConfusionMatrix::iou() const {
  std::vector<double> out(classes_, 0.0);
  for (int c = 0; c < classes_; ++c) {
    std::uint64_t row = 0, col = 0;
    for (int k = 0; k < classes_; ++k) {
      row += at(c, k);
      col += at(k, c);
    }
    const std::uint64_t tp = at(c, c);
    const std::uint64_t denom = row + col - tp;
    out[c] = denom ? static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
  return out;
}

std::vector<bool> ConfusionMatrix::present() const {
  std::vector<bool> out(classes_, false);
  for (int c = 0; c < classes_; ++c) {
    for (int k = 0; k < classes_; ++k) {
      if (at(c, k) || at(k, c)) out[c] = true;
    }
  }
  return out;
}

double ConfusionMatrix::mean_iou() const {
  const auto values = iou();
  const auto mask = present();
  double total = 0.0;
  int n = 0;
  for (int c = 0; c < classes_; ++c) {
    if (!mask[c]) continue;
    total += values[c];
    ++n;
  }
  return n ? total / n : 0.0;
}

LabelMask predict_multiscale(const ModelState& model, const Tensor& image,
                             const std::vector<double>& scales) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  Tensor total;
  for (double s : scales) {
    Tensor probs = bilinear_resize(softmax(predict_logits(model, bilinear_resize(image, s))), h, w);
    if (total.empty()) {
      total = std::move(probs);
    } else {
      for (std::size_t i = 0; i < total.numel(); ++i) total[i] += probs[i];
    }
  }
  return argmax_labels(total);
}

EvalReport evaluate(const ModelState& model, const SceneDataset& valset,
                    const std::vector<double>& scales) {
  ConfusionMatrix cm(valset.num_classes);
  for (const Sample& s : valset.items) cm.add(s.label, predict_multiscale(model, s.image, scales));
  EvalReport report;
  report.iou = cm.iou();
  report.present = cm.present();
  report.miou = cm.mean_iou();
  report.confusion = cm.counts();
  return report;
}

// ---- budget -----------------------------------------------------------------

BudgetLedger budget(int n_coarse, int n_fine, FineCostModel model, int n_synthetic) {
  if (n_coarse < 0 || n_fine < 0 || n_synthetic < 0) throw UsageError("budget: negative count");
  BudgetLedger ledger;
  ledger.n_coarse = n_coarse;
  ledger.n_fine = n_fine;
  ledger.n_synthetic = n_synthetic;
  ledger.fine_minutes = fine_minutes(model);
  ledger.hours = (n_coarse * ledger.coarse_minutes + n_fine * ledger.fine_minutes) / 60.0;
  return ledger;
}

BudgetLedger budget(const ExperimentConfig& cfg) {
  return budget(cfg.n_coarse, cfg.n_fine, cfg.fine_cost, cfg.n_synthetic);
}

// ---- self-training ------------------------------------------------------------

SceneDataset relabel(const ModelState& model, const SceneDataset& coarse, const TtaConfig& tta) {
  SceneDataset out = coarse;
  for (Sample& s : out.items) {
    const PseudoLabelResult pseudo = pseudo_label(model, s.image, tta);
    s.label = merge(s.label, pseudo.label);
  }
  return out;
}

std::vector<IterationResult> self_train(const ExperimentConfig& cfg, const ExperimentData& data,
                                        const ProgressFn& progress) {
  cfg.validate();
  std::vector<IterationResult> results;
  SceneDataset coarse = data.coarse;
  for (Sample& s : coarse.items) {
    if (!s.label.has_provenance()) s.label.mark_manual();
  }
  const double hours = budget(static_cast<int>(data.coarse.items.size()),
                              static_cast<int>(data.fine.items.size()), cfg.fine_cost)
                           .hours;
  for (int r = 0; r <= cfg.iterations; ++r) {
    if (r > 0) coarse = relabel(results.back().model, coarse, cfg.tta);
    std::vector<const Sample*> real;
    for (const Sample& s : coarse.items) real.push_back(&s);
    for (const Sample& s : data.fine.items) real.push_back(&s);
    const ModelState* init = r > 0 && cfg.warm_start ? &results.back().model : nullptr;
    TrainResult trained = train(cfg, real, data.synthetic, r, init);

    IterationResult it;
    it.iteration = r;
    it.model = std::move(trained.model);
    it.log = std::move(trained.log);
    it.report = evaluate(it.model, data.val, cfg.eval_scales);
    it.report.iteration = r;
    it.report.budget_hours = hours;
    it.coarse = coarse;
    if (progress) {
      progress("iteration " + std::to_string(r) + ": mIoU " + format_number(it.report.miou));
    }
    results.push_back(std::move(it));
  }
  return results;
}

// ---- sampling -----------------------------------------------------------------

SamplingRun sampling_run(const ExperimentConfig& cfg, const ExperimentData& data, SamplingMode mode,
                         std::size_t initial, std::size_t increment, std::size_t steps,
                         const ProgressFn& progress) {
  const SceneDataset& pool = data.coarse;
  if (data.fine.items.size() < pool.items.size()) {
    throw UsageError("sampling_run: dense labels required for every pool image");
  }
  SceneDataset dense;
  dense.num_classes = pool.num_classes;
  dense.items.assign(data.fine.items.begin(), data.fine.items.begin() + pool.items.size());
  const ClassPresence truth = label_distribution(dense);

  SamplerState state = SamplerState::fresh(pool.items.size());
  Rng rng(derive_seed(cfg.seed, kSamplingStream));
  uniform_select(state, initial, rng);

  SamplingRun run;
  auto record = [&] {
    SamplingStep step;
    step.labelled = state.chosen.size();
    step.chosen = state.chosen;
    step.coverage.assign(pool.num_classes, 0.0);
    for (std::size_t i : state.chosen) {
      for (int c = 0; c < pool.num_classes; ++c) step.coverage[c] += truth[i][c];
    }
    step.min_coverage = *std::min_element(step.coverage.begin(), step.coverage.end());
    run.steps.push_back(std::move(step));
  };
  auto train_on_chosen = [&](int round) {
    std::vector<const Sample*> real;
    for (std::size_t i : state.chosen) real.push_back(&pool.items[i]);
    return train(cfg, real, data.synthetic, round).model;
  };

  record();
  ModelState model;
  bool have_model = false;
  for (std::size_t s = 0; s < steps; ++s) {
    if (mode == SamplingMode::kModelBased) {
      if (!have_model || cfg.refresh_distribution) {
        model = train_on_chosen(static_cast<int>(s));
        have_model = true;
        state.presence = estimate_distribution(model, pool);
        if (cfg.binary_presence) state.presence = binarize(state.presence);
      }
      select_next(state, increment);
    } else {
      uniform_select(state, increment, rng);
    }
    record();
    if (progress) {
      progress(std::string(mode == SamplingMode::kModelBased ? "model-based" : "uniform") +
               " step " + std::to_string(s + 1) + ": min coverage " +
               format_number(run.steps.back().min_coverage));
    }
  }
  run.final_model = train_on_chosen(static_cast<int>(steps));
  run.final_report = evaluate(run.final_model, data.val, cfg.eval_scales);
  return run;
}

// ---- budget sweep -------------------------------------------------------------

std::vector<SweepRow> budget_sweep(const ExperimentConfig& cfg, const std::vector<SweepPoint>& grid,
                                   const ProgressFn& progress) {
  if (grid.empty()) throw UsageError("budget_sweep: empty grid");
  int max_coarse = 0, max_fine = 0;
  for (const SweepPoint& p : grid) {
    if (p.n_coarse < 0 || p.n_fine < 0) throw UsageError("budget_sweep: negative image count");
    max_coarse = std::max(max_coarse, p.n_coarse);
    max_fine = std::max(max_fine, p.n_fine);
  }
  ExperimentConfig base = cfg;
  base.n_coarse = max_coarse;
  base.n_fine = max_fine;
  const ExperimentData all = build_data(base);

  // One seeded permutation per method; every point takes a prefix, so the
  // chosen sets nest across budget points.
  Rng rng(derive_seed(cfg.seed, kSweepStream));
  SamplerState coarse_state = SamplerState::fresh(all.coarse.items.size());
  const auto coarse_order = uniform_select(coarse_state, coarse_state.pool.size(), rng);
  SamplerState fine_state = SamplerState::fresh(all.fine.items.size());
  const auto fine_order = uniform_select(fine_state, fine_state.pool.size(), rng);

  // Each row depends only on its method's image count, so repeated counts
  // across the grid reuse the earlier result.
  std::map<int, SweepRow> ours_rows, fine_rows;
  const auto run_ours = [&](int n) {
    ExperimentData ours;
    ours.coarse.num_classes = ours.fine.num_classes = all.coarse.num_classes;
    for (int i = 0; i < n; ++i) ours.coarse.items.push_back(all.coarse.items[coarse_order[i]]);
    ours.synthetic = all.synthetic;
    ours.val = all.val;
    ExperimentConfig ours_cfg = cfg;
    ours_cfg.n_coarse = n;
    ours_cfg.n_fine = 0;
    const auto iterations = self_train(ours_cfg, ours);
    SweepRow row{budget(n, 0, cfg.fine_cost).hours, "ours", iterations.back().report.miou, n, {}};
    for (const Sample& s : ours.coarse.items) row.ids.push_back(s.id);
    return row;
  };
  const auto run_fine = [&](int n) {
    std::vector<const Sample*> fine;
    for (int i = 0; i < n; ++i) fine.push_back(&all.fine.items[fine_order[i]]);
    ExperimentConfig fine_cfg = cfg;
    fine_cfg.n_coarse = 0;
    fine_cfg.n_synthetic = 0;
    fine_cfg.n_fine = n;
    const SceneDataset no_synthetic{all.fine.num_classes, {}};
    const ModelState fine_model = train(fine_cfg, fine, no_synthetic, 0).model;
    SweepRow row{budget(0, n, cfg.fine_cost).hours, "fine-only",
                 evaluate(fine_model, all.val, cfg.eval_scales).miou, n, {}};
    for (const Sample* s : fine) row.ids.push_back(s->id);
    return row;
  };

  std::vector<SweepRow> rows;
  for (const SweepPoint& p : grid) {
    if (!ours_rows.count(p.n_coarse)) ours_rows.emplace(p.n_coarse, run_ours(p.n_coarse));
    rows.push_back(ours_rows.at(p.n_coarse));
    if (!fine_rows.count(p.n_fine)) fine_rows.emplace(p.n_fine, run_fine(p.n_fine));
    rows.push_back(fine_rows.at(p.n_fine));
    if (progress) {
      progress("budget point coarse=" + std::to_string(p.n_coarse) + " fine=" +
               std::to_string(p.n_fine) + ": ours " + format_number(rows[rows.size() - 2].miou) +
               ", fine-only " + format_number(rows.back().miou));
    }
  }
  return rows;
}

// ---- reports ------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

void write_report_header(std::ostream& out, int num_classes) {
  out << "iteration";
  for (int c = 0; c < num_classes; ++c) out << ",class_" << c;
  out << ",miou,budget_hours\n";
}

void write_report_row(std::ostream& out, const EvalReport& report) {
  out << report.iteration;
  for (std::size_t c = 0; c < report.iou.size(); ++c) {
    out << ',' << (report.present[c] ? format_number(report.iou[c]) : std::string("nan"));
  }
  out << ',' << format_number(report.miou) << ',' << format_number(report.budget_hours) << '\n';
}

void write_loss_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "round,epoch,loss,cross_entropy,boundary\n";
  for (const EpochLog& e : log) {
    out << e.round << ',' << e.epoch << ',' << format_number(e.loss) << ','
        << format_number(e.cross_entropy) << ',' << format_number(e.boundary) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "budget_hours,method,miou,images\n";
  for (const SweepRow& r : rows) {
    out << format_number(r.budget_hours) << ',' << r.method << ',' << format_number(r.miou) << ','
        << r.images << '\n';
  }
}

LabelMask hflip(const LabelMask& mask) {
  LabelMask out = mask;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const std::size_t src = static_cast<std::size_t>(y) * mask.width + (mask.width - 1 - x);
      const std::size_t dst = static_cast<std::size_t>(y) * mask.width + x;
      out.labels[dst] = mask.labels[src];
      if (mask.has_provenance()) out.provenance[dst] = mask.provenance[src];
    }
  }
  return out;
}

}  // namespace c2f
