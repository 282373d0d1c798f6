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

// c2f: command-line driver.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "c2f/config.hpp"
#include "c2f/container.hpp"
#include "c2f/pipeline.hpp"

namespace fs = std::filesystem;
using namespace c2f;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct ConfigOptions {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "key=value config file");
    cmd->add_option("-s,--set", overrides, "override one key, e.g. --set loss.lambda_bd=0");
  }

  RunConfig load() const {
    RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
    for (const std::string& kv : overrides) apply_config_text(cfg, kv, "--set");
    return cfg;
  }
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void echo_config(const fs::path& path, const RunConfig& cfg) {
  auto out = open_out(path);
  write_config(out, cfg);
}

fs::path echo_path(const std::string& output) { return fs::path(output + ".config"); }

void print_histogram(const SceneDataset& data, const std::string& title) {
  const auto hist = class_histogram(data);
  std::uint64_t total = 0;
  for (auto n : hist) total += n;
  std::cout << title << " (" << data.items.size() << " scenes) class pixel shares:";
  for (std::size_t c = 0; c < hist.size(); ++c) {
    std::cout << ' ' << c << '=' << format_number(total ? static_cast<double>(hist[c]) / total : 0.0);
  }
  std::cout << '\n';
}

SceneDataset subset(const SceneDataset& data, Domain domain) {
  SceneDataset out{data.num_classes, {}};
  for (const Sample& s : data.items) {
    if (s.domain == domain) out.items.push_back(s);
  }
  return out;
}

ExperimentData split(const SceneDataset& train, const SceneDataset& val) {
  ExperimentData data;
  data.coarse = subset(train, Domain::kRealCoarse);
  data.fine = subset(train, Domain::kRealFine);
  data.synthetic = subset(train, Domain::kSynthetic);
  data.val = val;
  for (Sample& s : data.coarse.items) {
    if (!s.label.has_provenance()) s.label.mark_manual();
  }
  return data;
}

void check_classes(const SceneDataset& data, const RunConfig& cfg, const std::string& what) {
  if (data.num_classes != cfg.experiment.arch.num_classes) {
    throw UsageError(what + " has " + std::to_string(data.num_classes) +
                     " classes but scene.num_classes is " +
                     std::to_string(cfg.experiment.arch.num_classes));
  }
}

void check_model(const ModelState& model, const SceneDataset& data, const std::string& what) {
  if (model.arch.num_classes != data.num_classes) {
    throw UsageError("model predicts " + std::to_string(model.arch.num_classes) + " classes but " +
                     what + " has " + std::to_string(data.num_classes));
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

void print_report(const EvalReport& r) {
  std::cout << "mIoU " << format_number(r.miou) << " per class:";
  for (std::size_t c = 0; c < r.iou.size(); ++c) {
    std::cout << ' ' << (r.present[c] ? format_number(r.iou[c]) : std::string("nan"));
  }
  std::cout << '\n';
}

int report_violations(const std::string& path, const std::vector<Violation>& violations) {
  for (const Violation& v : violations) {
    std::cout << path << ": ";
    if (!v.record_id.empty()) std::cout << "record '" << v.record_id << "' ";
    std::cout << "offset " << v.offset << ": " << v.message << '\n';
  }
  std::cout << path << ": " << violations.size() << " violations\n";
  return violations.empty() ? kOk : kData;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Coarse-to-fine semantic segmentation on generated toy scenes"};
  app.require_subcommand(1);
  const auto progress = [](const std::string& msg) { std::cout << msg << std::endl; };

  // config
  auto* config_cmd = app.add_subcommand("config", "print every config key with its documented default");
  ConfigOptions config_opts;
  config_opts.attach(config_cmd);
  config_cmd->callback([&] { write_config(std::cout, config_opts.load()); });

  // generate
  auto* gen = app.add_subcommand("generate", "write synthetic and real scene pools");
  ConfigOptions gen_cfg;
  gen_cfg.attach(gen);
  std::string gen_out, gen_val;
  gen->add_option("-o,--out", gen_out, "training container (synthetic + real, dense)")->required();
  gen->add_option("--val-out", gen_val, "also write the validation container here");
  gen->callback([&] {
    const RunConfig cfg = gen_cfg.load();
    ExperimentConfig exp = cfg.experiment;
    exp.n_fine = std::max(exp.n_coarse, exp.n_fine);
    exp.n_coarse = 0;
    const ExperimentData data = build_data(exp);
    SceneDataset train = data.synthetic;
    train.items.insert(train.items.end(), data.fine.items.begin(), data.fine.items.end());
    write_container(gen_out, train);
    echo_config(echo_path(gen_out), cfg);
    print_histogram(data.synthetic, "synthetic");
    print_histogram(data.fine, "real");
    std::cout << "wrote " << train.items.size() << " records to " << gen_out << '\n';
    if (!gen_val.empty()) {
      write_container(gen_val, data.val);
      print_histogram(data.val, "val");
      std::cout << "wrote " << data.val.items.size() << " records to " << gen_val << '\n';
    }
  });

  // coarsify
  auto* coarse_cmd = app.add_subcommand("coarsify", "turn dense real labels into coarse ones");
  ConfigOptions coarse_cfg;
  coarse_cfg.attach(coarse_cmd);
  std::string coarse_in, coarse_out;
  coarse_cmd->add_option("-i,--in", coarse_in, "input container")->required();
  coarse_cmd->add_option("-o,--out", coarse_out, "output container")->required();
  coarse_cmd->callback([&] {
    const RunConfig cfg = coarse_cfg.load();
    SceneDataset data = read_container(coarse_in);
    double total = 0.0;
    int n = 0;
    for (Sample& s : data.items) {
      if (s.domain != Domain::kRealFine) continue;
      s.label = coarsify(s.label, cfg.experiment.coarse);
      s.domain = Domain::kRealCoarse;
      s.annotation_minutes = kCoarseMinutes;
      total += labeled_fraction(s.label);
      ++n;
    }
    write_container(coarse_out, data);
    echo_config(echo_path(coarse_out), cfg);
    std::cout << "coarsified " << n << " real scenes, mean labelled fraction "
              << format_number(n ? total / n : 0.0) << '\n';
  });

  // pseudolabel
  auto* pl = app.add_subcommand("pseudolabel", "fill IGNORE pixels of coarse scenes with TTA pseudo labels");
  ConfigOptions pl_cfg;
  pl_cfg.attach(pl);
  std::string pl_model, pl_in, pl_out;
  pl->add_option("-m,--model", pl_model, "checkpoint")->required();
  pl->add_option("-i,--in", pl_in, "container with real-coarse records")->required();
  pl->add_option("-o,--out", pl_out, "output container")->required();
  pl->callback([&] {
    const RunConfig cfg = pl_cfg.load();
    const ModelState model = load_checkpoint(pl_model);
    SceneDataset data = read_container(pl_in);
    check_model(model, data, pl_in);
    const SceneDataset coarse = relabel(model, subset(data, Domain::kRealCoarse), cfg.experiment.tta);
    std::size_t next = 0;
    double before = 0.0, after = 0.0;
    for (Sample& s : data.items) {
      if (s.domain != Domain::kRealCoarse) continue;
      before += labeled_fraction(s.label);
      s = coarse.items[next++];
      after += labeled_fraction(s.label);
    }
    write_container(pl_out, data);
    echo_config(echo_path(pl_out), cfg);
    const double n = next ? static_cast<double>(next) : 1.0;
    std::cout << "relabelled " << next << " coarse scenes, labelled fraction "
              << format_number(before / n) << " -> " << format_number(after / n) << '\n';
  });

  // sample
  auto* sample = app.add_subcommand("sample", "choose the next pool images to annotate");
  ConfigOptions sample_cfg;
  sample_cfg.attach(sample);
  std::string sample_in, sample_model, sample_chosen, sample_out;
  std::size_t sample_k = 0;
  sample->add_option("-i,--in", sample_in, "pool container (all records)")->required();
  sample->add_option("-k", sample_k, "images to add")->required();
  sample->add_option("-m,--model", sample_model, "checkpoint (model-based mode)");
  sample->add_option("--chosen", sample_chosen, "ids already chosen, one per line");
  sample->add_option("-o,--out", sample_out, "id list: previously chosen ids, then the new ones")->required();
  sample->callback([&] {
    const RunConfig cfg = sample_cfg.load();
    const SceneDataset pool = read_container(sample_in);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < pool.items.size(); ++i) index[pool.items[i].id] = i;
    SamplerState state = SamplerState::fresh(pool.items.size());
    if (!sample_chosen.empty()) {
      for (const std::string& id : read_lines(sample_chosen)) {
        const auto it = index.find(id);
        if (it == index.end()) throw DataError("chosen id '" + id + "' is not in " + sample_in);
        const auto pos = std::find(state.pool.begin(), state.pool.end(), it->second);
        if (pos == state.pool.end()) throw DataError("chosen id '" + id + "' listed twice");
        state.pool.erase(pos);
        state.chosen.push_back(it->second);
      }
    }
    std::vector<std::size_t> picked;
    if (cfg.experiment.sampling == SamplingMode::kModelBased) {
      if (sample_model.empty()) throw UsageError("model-based sampling needs --model");
      const ModelState model = load_checkpoint(sample_model);
      check_model(model, pool, sample_in);
      state.presence = estimate_distribution(model, pool);
      if (cfg.experiment.binary_presence) state.presence = binarize(state.presence);
      picked = select_next(state, sample_k);
    } else {
      Rng rng(derive_seed(cfg.experiment.seed, 0x73616d70, state.chosen.size()));
      picked = uniform_select(state, sample_k, rng);
    }
    auto out = open_out(sample_out);
    for (std::size_t i : state.chosen) out << pool.items[i].id << '\n';
    echo_config(echo_path(sample_out), cfg);
    std::cout << "chose " << picked.size() << " new images, " << state.chosen.size() << " in total\n";
  });

  // selftrain
  auto* st = app.add_subcommand("selftrain", "pre-train, then alternate pseudo-labelling and re-training");
  ConfigOptions st_cfg;
  st_cfg.attach(st);
  std::string st_data, st_val, st_out;
  st->add_option("-d,--data", st_data, "training container")->required();
  st->add_option("-v,--val", st_val, "validation container")->required();
  st->add_option("-o,--out-dir", st_out, "output directory")->required();
  st->callback([&] {
    const RunConfig cfg = st_cfg.load();
    const SceneDataset train = read_container(st_data);
    const SceneDataset val = read_container(st_val);
    check_classes(train, cfg, st_data);
    check_classes(val, cfg, st_val);
    const ExperimentData data = split(train, val);
    fs::create_directories(st_out);
    const fs::path dir(st_out);
    echo_config(dir / "config.txt", cfg);
    const auto results = self_train(cfg.experiment, data, progress);
    auto report = open_out(dir / "report.csv");
    auto losses = open_out(dir / "loss.csv");
    write_report_header(report, train.num_classes);
    std::vector<EpochLog> log;
    for (const IterationResult& r : results) {
      const std::string tag = std::to_string(r.iteration);
      save_checkpoint((dir / ("iteration_" + tag + ".ckpt")).string(), r.model);
      write_report_row(report, r.report);
      log.insert(log.end(), r.log.begin(), r.log.end());
      // Training container as used in this iteration: coarse records carry
      // the merged labels.
      SceneDataset labels = train;
      std::size_t next = 0;
      for (Sample& s : labels.items) {
        if (s.domain == Domain::kRealCoarse) s = r.coarse.items[next++];
      }
      write_container((dir / ("labels_" + tag + ".c2fd")).string(), labels);
    }
    write_loss_log(losses, log);
    print_report(results.back().report);
  });

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "multiscale mIoU of a checkpoint");
  ConfigOptions ev_cfg;
  ev_cfg.attach(ev);
  std::string ev_model, ev_data, ev_out;
  ev->add_option("-m,--model", ev_model, "checkpoint")->required();
  ev->add_option("-d,--data", ev_data, "container with dense labels")->required();
  ev->add_option("-o,--out", ev_out, "report CSV");
  ev->callback([&] {
    const RunConfig cfg = ev_cfg.load();
    const ModelState model = load_checkpoint(ev_model);
    const SceneDataset data = read_container(ev_data);
    check_model(model, data, ev_data);
    const EvalReport r = evaluate(model, data, cfg.experiment.eval_scales);
    print_report(r);
    if (!ev_out.empty()) {
      auto out = open_out(ev_out);
      write_report_header(out, data.num_classes);
      write_report_row(out, r);
      echo_config(echo_path(ev_out), cfg);
    }
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "ours vs fine-only across annotation budgets");
  ConfigOptions sw_cfg;
  sw_cfg.attach(sw);
  std::string sw_out;
  sw->add_option("-o,--out", sw_out, "sweep CSV")->required();
  sw->callback([&] {
    const RunConfig cfg = sw_cfg.load();
    const auto rows = budget_sweep(cfg.experiment, cfg.sweep_grid(), progress);
    auto out = open_out(sw_out);
    write_sweep_csv(out, rows);
    echo_config(echo_path(sw_out), cfg);
  });

  // verify
  auto* vf = app.add_subcommand("verify", "check container invariants");
  std::vector<std::string> vf_files;
  bool vf_monotone = false;
  vf->add_option("files", vf_files, "containers")->required();
  vf->add_flag("--monotone", vf_monotone,
               "files are successive label sets: manual pixels must be unchanged and the "
               "labelled fraction non-decreasing");
  int verify_status = kOk;
  vf->callback([&] {
    std::vector<SceneDataset> sets;
    for (const std::string& f : vf_files) {
      const auto bytes = read_file(f);
      if (report_violations(f, verify(bytes)) != kOk) {
        verify_status = kData;
        continue;
      }
      if (vf_monotone) sets.push_back(parse(bytes));
    }
    if (!vf_monotone || verify_status != kOk) return;
    std::size_t problems = 0;
    for (std::size_t f = 1; f < sets.size(); ++f) {
      const SceneDataset& a = sets[f - 1];
      const SceneDataset& b = sets[f];
      if (a.items.size() != b.items.size()) {
        std::cout << vf_files[f] << ": record count differs from " << vf_files[f - 1] << '\n';
        ++problems;
        continue;
      }
      for (std::size_t i = 0; i < a.items.size(); ++i) {
        const LabelMask& la = a.items[i].label;
        const LabelMask& lb = b.items[i].label;
        if (a.items[i].id != b.items[i].id || la.size() != lb.size()) {
          std::cout << vf_files[f] << ": record " << i << " does not match " << vf_files[f - 1] << '\n';
          ++problems;
          continue;
        }
        for (std::size_t p = 0; p < la.size(); ++p) {
          if (la.provenance[p] == Provenance::kManual &&
              (lb.provenance[p] != Provenance::kManual || lb.labels[p] != la.labels[p])) {
            std::cout << vf_files[f] << ": record '" << b.items[i].id << "' changed manual pixel " << p
                      << '\n';
            ++problems;
            break;
          }
        }
        if (labeled_fraction(lb) < labeled_fraction(la)) {
          std::cout << vf_files[f] << ": record '" << b.items[i].id << "' labelled fraction fell from "
                    << format_number(labeled_fraction(la)) << " to "
                    << format_number(labeled_fraction(lb)) << '\n';
          ++problems;
        }
      }
    }
    std::cout << "monotone check: " << problems << " violations\n";
    if (problems) verify_status = kData;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return verify_status;
}
