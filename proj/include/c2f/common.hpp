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

#ifndef C2F_COMMON_HPP_
#define C2F_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

// Exit-code classes used by the command line tool:
//   UsageError -> 1, DataError -> 2, NumericalError -> 3.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NumericalError is declared in tensor.hpp since tensor ops raise it.

using Rng = std::mt19937_64;

/// Mixes a base seed with stream identifiers (splitmix64 finalizer chain).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

inline constexpr std::uint8_t kIgnore = 255;

enum class Provenance : std::uint8_t { kManual = 0, kPseudo = 1, kIgnore = 2 };

enum class Domain : std::uint8_t { kSynthetic = 0, kRealCoarse = 1, kRealFine = 2 };

const char* domain_name(Domain d);

/// H x W class-id grid. `provenance` is either empty (not tracked) or has
/// one entry per pixel.
struct LabelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;
  std::vector<Provenance> provenance;

  LabelMask() = default;
  LabelMask(int h, int w, std::uint8_t fill = kIgnore);

  std::size_t size() const { return labels.size(); }
  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  bool has_provenance() const { return provenance.size() == labels.size(); }
  bool has_ignore() const;

  /// Provenance derived from the labels alone: IGNORE -> ignore, else manual.
  void mark_manual();

  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

/// One (image, label) pair. `image` is a [3,H,W] tensor.
struct Sample {
  std::string id;
  Domain domain = Domain::kSynthetic;
  bool augmented = false;
  Tensor image;
  LabelMask label;
  double annotation_minutes = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct SceneDataset {
  int num_classes = 0;
  std::vector<Sample> items;

  friend bool operator==(const SceneDataset&, const SceneDataset&) = default;
};

/// Keeps freed tensor buffers in the heap instead of returning them to the OS.
/// Training allocates and frees the same large buffers every step, and the
/// default glibc thresholds turn that into mmap/munmap churn. No-op elsewhere.
void tune_allocator();

}  // namespace c2f

#endif  // C2F_COMMON_HPP_
