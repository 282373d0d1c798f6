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

// Pre-training, iterative pseudo-labelling and re-training, evaluation, and
// the annotation-budget model.

#ifndef C2F_PIPELINE_HPP_
#define C2F_PIPELINE_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "c2f/augment.hpp"
#include "c2f/coarsify.hpp"
#include "c2f/common.hpp"
#include "c2f/datagen.hpp"
#include "c2f/losses.hpp"
#include "c2f/model.hpp"
#include "c2f/pseudolabel.hpp"
#include "c2f/sampler.hpp"

namespace c2f {

enum class SamplingMode : std::uint8_t { kModelBased, kUniform };
enum class FineCostModel : std::uint8_t { kCityscapes, kBdd };

inline constexpr double kCoarseMinutes = 7.0;
inline constexpr double kFineMinutesCityscapes = 90.0;
inline constexpr double kFineMinutesBdd = 75.0;

double fine_minutes(FineCostModel model);

struct ExperimentConfig {
  SceneSpec scene;
  int n_coarse = 60;
  int n_fine = 0;
  int n_synthetic = 60;
  int n_val = 40;
  int iterations = 3;
  int epochs = 30;
  /// Lower bound on SGD steps per round (0: epochs alone decide).
  int min_steps = 0;
  int batch_size = 8;
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_power = 2.0;
  std::uint64_t seed = 1;
  SamplingMode sampling = SamplingMode::kModelBased;
  bool refresh_distribution = true;
  bool binary_presence = false;
  std::vector<double> eval_scales{0.5, 1.0, 2.0};
  bool random_flip = true;
  bool cross_domain_augment = true;
  bool warm_start = false;
  FineCostModel fine_cost = FineCostModel::kCityscapes;

  ArchConfig arch;
  LossConfig loss;
  AugmentConfig augment;
  TtaConfig tta;
  CoarsePolicy coarse;

  void validate() const;
};

struct ExperimentData {
  SceneDataset coarse;     // real scenes, coarsified, provenance tracked
  SceneDataset fine;       // real scenes, dense
  SceneDataset synthetic;  // dense
  SceneDataset val;        // real scenes, dense
};

/// Real training scenes use indices [0, max(n_coarse, n_fine)), so coarse
/// and fine sets annotate the same images; validation scenes come from a
/// disjoint index range.
ExperimentData build_data(const ExperimentConfig& cfg);

struct EpochLog {
  int round = 0;
  int epoch = 0;
  double loss = 0.0;
  double cross_entropy = 0.0;
  double boundary = 0.0;
};

struct TrainResult {
  ModelState model;
  std::vector<EpochLog> log;
};

/// SGD over real (coarse and/or fine) items plus synthetic items with
/// cross-domain augmentation. `init` warm-starts from a model; otherwise a
/// fresh model is drawn from the seed alone; `round` only tags the log.
TrainResult train(const ExperimentConfig& cfg, const std::vector<const Sample*>& real,
                  const SceneDataset& synthetic, int round, const ModelState* init = nullptr);

TrainResult pretrain(const ExperimentConfig& cfg, const ExperimentData& data);

/// Global confusion matrix, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  /// IGNORE ground-truth pixels are skipped.
  void add(const LabelMask& truth, const LabelMask& prediction);
  std::uint64_t at(int truth, int predicted) const;
  int num_classes() const { return classes_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  /// TP / (TP + FP + FN); 0 when the class appears in neither GT nor prediction.
  std::vector<double> iou() const;
  /// Classes with some GT or predicted pixel.
  std::vector<bool> present() const;
  /// Mean IoU over present classes.
  double mean_iou() const;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

struct EvalReport {
  int iteration = 0;
  std::vector<double> iou;
  std::vector<bool> present;
  double miou = 0.0;
  std::vector<std::uint64_t> confusion;
  double budget_hours = 0.0;
};

/// Averages softmax maps over `scales` (resized back), takes the argmax.
LabelMask predict_multiscale(const ModelState& model, const Tensor& image,
                             const std::vector<double>& scales);

EvalReport evaluate(const ModelState& model, const SceneDataset& valset,
                    const std::vector<double>& scales);

struct BudgetLedger {
  int n_coarse = 0;
  int n_fine = 0;
  int n_synthetic = 0;
  double coarse_minutes = kCoarseMinutes;
  double fine_minutes = kFineMinutesCityscapes;
  double hours = 0.0;
};

BudgetLedger budget(int n_coarse, int n_fine, FineCostModel model = FineCostModel::kCityscapes,
                    int n_synthetic = 0);
BudgetLedger budget(const ExperimentConfig& cfg);

struct IterationResult {
  int iteration = 0;
  ModelState model;
  EvalReport report;
  std::vector<EpochLog> log;
  SceneDataset coarse;  // coarse labels used to train this iteration
};

using ProgressFn = std::function<void(const std::string&)>;

/// Iteration 0 is pre-training; each later iteration pseudo-labels the coarse
/// set with the previous model, merges, and re-trains.
std::vector<IterationResult> self_train(const ExperimentConfig& cfg, const ExperimentData& data,
                                        const ProgressFn& progress = {});

/// Pseudo-labels and merges every coarse item with `model`.
SceneDataset relabel(const ModelState& model, const SceneDataset& coarse, const TtaConfig& tta);

// ---- incremental sampling experiments ------------------------------------

struct SamplingStep {
  std::size_t labelled = 0;
  std::vector<double> coverage;  // true-label pixel coverage of the chosen set
  double min_coverage = 0.0;
  std::vector<std::size_t> chosen;
};

struct SamplingRun {
  std::vector<SamplingStep> steps;
  ModelState final_model;
  EvalReport final_report;
};

/// Starts from a seeded uniform draw of `initial` pool images and grows the
/// coarse-labelled set by `increment` per step, choosing with `mode`. Each
/// step trains on the chosen coarse images plus the synthetic set. The pool
/// is data.coarse; data.fine (dense labels of the same scenes) provides the
/// coverage reported per step.
SamplingRun sampling_run(const ExperimentConfig& cfg, const ExperimentData& data, SamplingMode mode,
                         std::size_t initial, std::size_t increment, std::size_t steps,
                         const ProgressFn& progress = {});

// ---- budget sweep ---------------------------------------------------------

struct SweepPoint {
  int n_coarse = 0;  // images for "ours" (coarse + synthetic)
  int n_fine = 0;    // images for the fine-only baseline
};

struct SweepRow {
  double budget_hours = 0.0;
  std::string method;
  double miou = 0.0;
  int images = 0;
  std::vector<std::string> ids;  // training images used; not written to the CSV
};

/// Runs ours (coarse + synthetic, self-training with cfg.iterations) and the
/// fine-only baseline at every point. Image sets nest across points.
std::vector<SweepRow> budget_sweep(const ExperimentConfig& cfg, const std::vector<SweepPoint>& grid,
                                   const ProgressFn& progress = {});

// ---- reports --------------------------------------------------------------

void write_report_header(std::ostream& out, int num_classes);
void write_report_row(std::ostream& out, const EvalReport& report);
void write_loss_log(std::ostream& out, const std::vector<EpochLog>& log);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
std::string format_number(double v);

LabelMask hflip(const LabelMask& mask);

}  // namespace c2f

#endif  // C2F_PIPELINE_HPP_
