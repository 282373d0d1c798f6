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

#include "c2f/common.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>

namespace c2f {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::kSynthetic:
      return "synthetic";
    case Domain::kRealCoarse:
      return "real-coarse";
    case Domain::kRealFine:
      return "real-fine";
  }
  return "unknown";
}

LabelMask::LabelMask(int h, int w, std::uint8_t fill)
    : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

bool LabelMask::has_ignore() const {
  return std::find(labels.begin(), labels.end(), kIgnore) != labels.end();
}

void LabelMask::mark_manual() {
  provenance.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    provenance[i] = labels[i] == kIgnore ? Provenance::kIgnore : Provenance::kManual;
  }
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace c2f
