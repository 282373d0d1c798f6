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

// Little-endian primitive encoding shared by the checkpoint and dataset formats.

#ifndef C2F_SRC_BINARY_IO_HPP_
#define C2F_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "c2f/common.hpp"

namespace c2f::detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

/// Reader that tracks the byte offset so errors can name it.
class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const { return offset_; }

  template <typename T>
  T get_le(const char* what) {
    unsigned char bytes[sizeof(T)];
    read_raw(reinterpret_cast<char*>(bytes), sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
    }
    return static_cast<T>(u);
  }

  float get_f32(const char* what) { return std::bit_cast<float>(get_le<std::uint32_t>(what)); }
  double get_f64(const char* what) { return std::bit_cast<double>(get_le<std::uint64_t>(what)); }

  void read_raw(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw DataError(std::string("unexpected end of file reading ") + what + " at offset " +
                      std::to_string(offset_));
    }
    offset_ += n;
  }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace c2f::detail

#endif  // C2F_SRC_BINARY_IO_HPP_
