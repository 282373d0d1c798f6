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

// Flat key=value run configuration.
//
//   # comment
//   loss.lambda_bd = 1
//   tta.scales = 0.5,1,2
//
// Keys are namespaced; an unknown key is an error so typos cannot silently
// fall back to defaults.

#ifndef C2F_CONFIG_HPP_
#define C2F_CONFIG_HPP_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/pipeline.hpp"

namespace c2f {

struct RunConfig {
  ExperimentConfig experiment;
  /// Initial uniform draw for sampling runs; 0 means 1/8 of the pool.
  std::size_t sample_initial = 0;
  std::size_t sample_increment = 25;
  std::size_t sample_steps = 3;
  std::vector<int> sweep_coarse{60, 120};
  std::vector<int> sweep_fine{5, 9};

  std::vector<SweepPoint> sweep_grid() const;
};

struct ConfigKey {
  std::string name;
  std::string doc;
  std::string default_value;
};

/// Every accepted key with its documentation and default.
const std::vector<ConfigKey>& config_keys();

/// Sets one key; throws UsageError on an unknown key or malformed value.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

/// Applies "key=value" lines on top of `cfg`. `source` names the input in
/// error messages.
void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source = "config");
RunConfig load_config(const std::string& path);

/// One "key = value" line per key, in a stable order; parses back to `cfg`.
void write_config(std::ostream& out, const RunConfig& cfg);

}  // namespace c2f

#endif  // C2F_CONFIG_HPP_
