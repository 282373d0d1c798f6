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

// Single-file dataset container.
//
// Layout (all integers little-endian):
//   "C2FD" | u16 version | u32 count | u16 classes
//   per record:
//     u16 id length | id bytes | u8 domain | u16 H | u16 W
//     f32 image[3][H][W] | u8 labels[H][W] | u8 provenance[H][W]
//
// Images are stored as float32; values that are not exactly representable
// are rounded on write. Masks without provenance are written with provenance
// derived from the labels. On read, annotation minutes follow the domain and
// `augmented` follows the "+aug" id suffix.

#ifndef C2F_CONTAINER_HPP_
#define C2F_CONTAINER_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "c2f/common.hpp"

namespace c2f {

inline constexpr std::uint16_t kContainerVersion = 1;

/// Minutes recorded for a sample of `domain` when read back from disk.
double default_annotation_minutes(Domain domain);

std::vector<std::uint8_t> serialize(const SceneDataset& dataset);
/// Throws DataError naming the byte offset of the first structural problem.
SceneDataset parse(std::span<const std::uint8_t> bytes);

void write_container(const std::string& path, const SceneDataset& dataset);
SceneDataset read_container(const std::string& path);
std::vector<std::uint8_t> read_file(const std::string& path);

struct Violation {
  std::string record_id;  // empty for header-level problems
  std::uint64_t offset = 0;
  std::string message;
};

/// Checks every container invariant without stopping at the first content
/// problem: label range, provenance codes and their consistency with IGNORE,
/// finite image values, duplicate ids, and trailing bytes. Structural damage
/// (bad magic, truncation) ends the scan with one violation.
std::vector<Violation> verify(std::span<const std::uint8_t> bytes);

}  // namespace c2f

#endif  // C2F_CONTAINER_HPP_
