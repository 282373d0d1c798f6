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

#include "c2f/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace c2f {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw UsageError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                   "' as " + expected);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  text = trim(text);
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    bad_value(key, text, std::is_integral_v<T> ? "an integer" : "a number");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  bad_value(key, text, "a boolean (true/false/1/0)");
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  text = trim(text);
  if (text.empty()) return out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(parse_number<T>(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string fmt_int(T v) { return std::to_string(v); }

template <typename T>
std::string fmt_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

struct Entry {
  const char* name;
  const char* doc;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Field accessors keep the table below one line per key.
#define C2F_DOUBLE(field) \
  [](RunConfig& c, std::string_view k, std::string_view v) { c.field = parse_number<double>(k, v); }, \
  [](const RunConfig& c) { return fmt(c.field); }
#define C2F_INT(field) \
  [](RunConfig& c, std::string_view k, std::string_view v) { c.field = parse_number<int>(k, v); }, \
  [](const RunConfig& c) { return fmt_int(c.field); }
#define C2F_SIZE(field)                                                     \
  [](RunConfig& c, std::string_view k, std::string_view v) {               \
    c.field = parse_number<std::size_t>(k, v);                               \
  },                                                                         \
  [](const RunConfig& c) { return fmt_int(c.field); }
#define C2F_BOOL(field) \
  [](RunConfig& c, std::string_view k, std::string_view v) { c.field = parse_bool(k, v); }, \
  [](const RunConfig& c) { return fmt(c.field); }
#define C2F_PAIR(field)                                                          \
  [](RunConfig& c, std::string_view k, std::string_view v) {                    \
    const auto xs = parse_list<std::remove_cvref_t<decltype(c.field[0])>>(k, v); \
    if (xs.size() != 2) bad_value(k, v, "a pair lo,hi");                          \
    c.field = {xs[0], xs[1]};                                                     \
  },                                                                              \
  [](const RunConfig& c) {                                                        \
    return fmt_list(std::vector<std::remove_cvref_t<decltype(c.field[0])>>(      \
        c.field.begin(), c.field.end()));                                         \
  }
#define C2F_LIST(type, field)                                                          \
  [](RunConfig& c, std::string_view k, std::string_view v) { c.field = parse_list<type>(k, v); }, \
  [](const RunConfig& c) { return fmt_list(c.field); }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"run.seed", "base seed for every random stream",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.experiment.seed = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return fmt_int(c.experiment.seed); }},

      {"scene.height", "scene height in pixels", C2F_INT(experiment.scene.height)},
      {"scene.width", "scene width in pixels", C2F_INT(experiment.scene.width)},
      {"scene.num_classes", "number of classes including background 0 (also sizes the model head)",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.experiment.scene.num_classes = c.experiment.arch.num_classes = parse_number<int>(k, v);
       },
       [](const RunConfig& c) { return fmt_int(c.experiment.scene.num_classes); }},
      {"scene.decay", "class frequency decay; weight of class c is decay^(c-1)",
       C2F_DOUBLE(experiment.scene.decay)},
      {"scene.class_weights", "explicit per-class weights, entry 0 unused (empty: use decay)",
       C2F_LIST(double, experiment.scene.class_weights)},
      {"scene.min_shapes", "fewest foreground shapes per scene", C2F_INT(experiment.scene.min_shapes)},
      {"scene.max_shapes", "most foreground shapes per scene", C2F_INT(experiment.scene.max_shapes)},
      {"scene.rect_extent", "rectangle side range, fraction of image side",
       C2F_PAIR(experiment.scene.rect_extent)},
      {"scene.disk_radius", "disk radius range, fraction of image side",
       C2F_PAIR(experiment.scene.disk_radius)},
      {"scene.triangle_extent", "triangle extent range, fraction of image side",
       C2F_PAIR(experiment.scene.triangle_extent)},
      {"scene.bar_length", "bar length range, fraction of image side",
       C2F_PAIR(experiment.scene.bar_length)},
      {"scene.bar_width", "bar width range in pixels", C2F_PAIR(experiment.scene.bar_width)},
      {"scene.texture_sigma", "per-pixel texture noise", C2F_DOUBLE(experiment.scene.texture_sigma)},
      {"scene.texture_amplitude", "class stripe texture amplitude",
       C2F_DOUBLE(experiment.scene.texture_amplitude)},
      {"scene.color_jitter", "per-shape color jitter", C2F_DOUBLE(experiment.scene.color_jitter)},
      {"scene.domain_shift", "strength of the real-domain appearance shift",
       C2F_DOUBLE(experiment.scene.domain_shift)},
      {"scene.real_noise_sigma", "sensor noise of real scenes",
       C2F_DOUBLE(experiment.scene.real_noise_sigma)},
      {"scene.real_hue_jitter", "per-scene hue jitter of real scenes",
       C2F_DOUBLE(experiment.scene.real_hue_jitter)},
      {"scene.paired", "share geometry between the two domains", C2F_BOOL(experiment.scene.paired)},
      {"scene.seed", "seed of the scene generator",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.experiment.scene.seed = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return fmt_int(c.experiment.scene.seed); }},

      {"data.n_coarse", "coarsely labelled real training scenes", C2F_INT(experiment.n_coarse)},
      {"data.n_fine", "finely labelled real training scenes", C2F_INT(experiment.n_fine)},
      {"data.n_synthetic", "synthetic training scenes", C2F_INT(experiment.n_synthetic)},
      {"data.n_val", "real validation scenes", C2F_INT(experiment.n_val)},

      {"coarse.target_labeled_fraction", "labelled fraction coarse masks aim for",
       C2F_DOUBLE(experiment.coarse.target_labeled_fraction)},
      {"coarse.min_component_area", "smaller surviving regions are dropped (pixels)",
       C2F_INT(experiment.coarse.min_component_area)},
      {"coarse.max_erosion_iters", "upper bound on erosion steps",
       C2F_INT(experiment.coarse.max_erosion_iters)},

      {"model.channels", "encoder channels per stage", C2F_LIST(int, experiment.arch.channels)},
      {"model.decoder_kernel", "decoder conv kernel size (odd)", C2F_INT(experiment.arch.decoder_kernel)},
      {"model.zero_init_head", "start the classifier head at zero", C2F_BOOL(experiment.arch.zero_init_head)},

      {"train.iterations", "self-training iterations after pre-training", C2F_INT(experiment.iterations)},
      {"train.epochs", "epochs per training round", C2F_INT(experiment.epochs)},
      {"train.min_steps", "lower bound on SGD steps per round (0: off)", C2F_INT(experiment.min_steps)},
      {"train.batch_size", "images per SGD step before augmentation", C2F_INT(experiment.batch_size)},
      {"train.base_lr", "initial learning rate", C2F_DOUBLE(experiment.base_lr)},
      {"train.lr_power", "poly schedule exponent", C2F_DOUBLE(experiment.lr_power)},
      {"train.momentum", "SGD momentum", C2F_DOUBLE(experiment.momentum)},
      {"train.weight_decay", "L2 weight decay", C2F_DOUBLE(experiment.weight_decay)},
      {"train.random_flip", "random horizontal flips", C2F_BOOL(experiment.random_flip)},
      {"train.cross_domain_augment", "paste synthetic class regions onto real scenes",
       C2F_BOOL(experiment.cross_domain_augment)},
      {"train.warm_start", "re-train from the previous model instead of from scratch",
       C2F_BOOL(experiment.warm_start)},

      {"loss.lambda1", "boundary term weight over ground-truth boundary pixels",
       C2F_DOUBLE(experiment.loss.lambda1)},
      {"loss.lambda2", "boundary term weight over predicted boundary pixels",
       C2F_DOUBLE(experiment.loss.lambda2)},
      {"loss.boundary_threshold", "boundary map threshold", C2F_DOUBLE(experiment.loss.boundary_threshold)},
      {"loss.lambda_bd", "weight of the boundary loss (0 disables it)", C2F_DOUBLE(experiment.loss.lambda_bd)},
      {"loss.gumbel_temperature", "Gumbel-softmax temperature",
       C2F_DOUBLE(experiment.loss.gumbel_temperature)},

      {"augment.p_select_real", "probability a real item gets an augmented twin",
       C2F_DOUBLE(experiment.augment.p_select_real)},
      {"augment.p_class", "probability each synthetic class is pasted", C2F_DOUBLE(experiment.augment.p_class)},

      {"tta.flips", "flip settings for pseudo-labelling (0 = none, 1 = horizontal)",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.experiment.tta.flips.clear();
         for (int f : parse_list<int>(k, v)) {
           if (f != 0 && f != 1) bad_value(k, v, "a list of 0/1");
           c.experiment.tta.flips.push_back(f == 1);
         }
       },
       [](const RunConfig& c) {
         std::vector<int> flips(c.experiment.tta.flips.begin(), c.experiment.tta.flips.end());
         return fmt_list(flips);
       }},
      {"tta.scales", "scales for pseudo-labelling", C2F_LIST(double, experiment.tta.scales)},
      {"tta.confidence_threshold", "averaged probability a pseudo label must exceed",
       C2F_DOUBLE(experiment.tta.confidence_threshold)},
      {"tta.combine", "mean_prob or mean_logit",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         v = trim(v);
         if (v == "mean_prob") {
           c.experiment.tta.combine = TtaCombine::kMeanProb;
         } else if (v == "mean_logit") {
           c.experiment.tta.combine = TtaCombine::kMeanLogit;
         } else {
           bad_value(k, v, "mean_prob or mean_logit");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.experiment.tta.combine == TtaCombine::kMeanProb ? "mean_prob" : "mean_logit");
       }},

      {"eval.scales", "multiscale evaluation scales", C2F_LIST(double, experiment.eval_scales)},
      {"budget.fine_cost", "minutes per fine image: cityscapes (90) or bdd (75)",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         v = trim(v);
         if (v == "cityscapes") {
           c.experiment.fine_cost = FineCostModel::kCityscapes;
         } else if (v == "bdd") {
           c.experiment.fine_cost = FineCostModel::kBdd;
         } else {
           bad_value(k, v, "cityscapes or bdd");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.experiment.fine_cost == FineCostModel::kBdd ? "bdd" : "cityscapes");
       }},

      {"sampler.mode", "model or uniform",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         v = trim(v);
         if (v == "model") {
           c.experiment.sampling = SamplingMode::kModelBased;
         } else if (v == "uniform") {
           c.experiment.sampling = SamplingMode::kUniform;
         } else {
           bad_value(k, v, "model or uniform");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.experiment.sampling == SamplingMode::kUniform ? "uniform" : "model");
       }},
      {"sampler.refresh_distribution", "re-estimate class presence with each grown model",
       C2F_BOOL(experiment.refresh_distribution)},
      {"sampler.binary_presence", "count images containing a class instead of pixels",
       C2F_BOOL(experiment.binary_presence)},
      {"sampler.initial", "initial uniform draw (0: one eighth of the pool)", C2F_SIZE(sample_initial)},
      {"sampler.increment", "images added per step", C2F_SIZE(sample_increment)},
      {"sampler.steps", "number of increments", C2F_SIZE(sample_steps)},

      {"sweep.coarse", "coarse image counts for ours, one per budget point", C2F_LIST(int, sweep_coarse)},
      {"sweep.fine", "fine image counts for the fine-only baseline, one per budget point",
       C2F_LIST(int, sweep_fine)},
  };
  return table;
}

#undef C2F_DOUBLE
#undef C2F_INT
#undef C2F_SIZE
#undef C2F_BOOL
#undef C2F_PAIR
#undef C2F_LIST

const Entry& find_entry(std::string_view key) {
  for (const Entry& e : entries()) {
    if (key == e.name) return e;
  }
  throw UsageError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

std::vector<SweepPoint> RunConfig::sweep_grid() const {
  if (sweep_coarse.size() != sweep_fine.size()) {
    throw UsageError("sweep.coarse and sweep.fine must list the same number of budget points");
  }
  std::vector<SweepPoint> grid;
  for (std::size_t i = 0; i < sweep_coarse.size(); ++i) grid.push_back({sweep_coarse[i], sweep_fine[i]});
  return grid;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    const RunConfig defaults;
    std::vector<ConfigKey> out;
    for (const Entry& e : entries()) out.push_back({e.name, e.doc, e.get(defaults)});
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  find_entry(key).set(cfg, key, value);
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) {
  return find_entry(key).get(cfg);
}

void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, buf.str(), path);
  return cfg;
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  for (const Entry& e : entries()) {
    out << "# " << e.doc << '\n' << e.name << " = " << e.get(cfg) << '\n';
  }
}

}  // namespace c2f
