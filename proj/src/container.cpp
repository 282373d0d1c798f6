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

#include "c2f/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "c2f/tensor.hpp"

namespace c2f {
namespace {

constexpr char kMagic[4] = {'C', '2', 'F', 'D'};
const std::string kAugSuffix = "+aug";

class Writer {
 public:
  template <typename T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    const auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw DataError(std::string("truncated container: ") + what + " needs " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ", " +
                      std::to_string(remaining()) + " left");
    }
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Content problems either throw (parse) or accumulate (verify).
class Reporter {
 public:
  explicit Reporter(std::vector<Violation>* sink) : sink_(sink) {}

  void report(const std::string& record, std::uint64_t offset, const std::string& message) {
    if (!sink_) {
      throw DataError((record.empty() ? std::string() : "record '" + record + "': ") + message +
                      " at offset " + std::to_string(offset));
    }
    sink_->push_back({record, offset, message});
  }

 private:
  std::vector<Violation>* sink_;
};

SceneDataset parse_impl(std::span<const std::uint8_t> bytes, Reporter& reporter) {
  Cursor cur(bytes);
  const auto magic = cur.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DataError("bad magic at offset 0: not a C2FD container");
  }
  const std::uint64_t version_at = cur.offset();
  const auto version = cur.get<std::uint16_t>("version");
  if (version != kContainerVersion) {
    throw DataError("unsupported container version " + std::to_string(version) + " at offset " +
                    std::to_string(version_at));
  }
  const auto count = cur.get<std::uint32_t>("image count");
  const std::uint64_t classes_at = cur.offset();
  const auto classes = cur.get<std::uint16_t>("class count");
  if (classes == 0 || classes >= kIgnore) {
    reporter.report("", classes_at, "class count " + std::to_string(classes) + " outside [1, 254]");
  }

  SceneDataset out;
  out.num_classes = classes;
  out.items.reserve(count);
  std::set<std::string> seen;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint64_t record_at = cur.offset();
    const auto id_len = cur.get<std::uint16_t>("id length");
    const auto id_bytes = cur.take(id_len, "id");
    Sample s;
    s.id.assign(id_bytes.begin(), id_bytes.end());
    const std::string name = s.id.empty() ? "#" + std::to_string(r) : s.id;
    if (s.id.empty()) reporter.report(name, record_at, "empty id");
    if (!seen.insert(s.id).second) reporter.report(name, record_at, "duplicate id");

    const std::uint64_t domain_at = cur.offset();
    const auto domain = cur.get<std::uint8_t>("domain tag");
    if (domain > 2) reporter.report(name, domain_at, "domain tag " + std::to_string(domain) + " not in {0,1,2}");
    s.domain = static_cast<Domain>(domain);
    const std::uint64_t dims_at = cur.offset();
    const auto h = cur.get<std::uint16_t>("height");
    const auto w = cur.get<std::uint16_t>("width");
    if (h == 0 || w == 0) reporter.report(name, dims_at, "zero image extent");
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    const std::uint64_t image_at = cur.offset();
    const auto image = cur.take(plane * 3 * 4, "image payload");
    s.image = Tensor({3, h, w});
    std::size_t nonfinite = 0, first_bad = 0;
    for (std::size_t i = 0; i < plane * 3; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(image[4 * i + b]) << (8 * b);
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v) && nonfinite++ == 0) first_bad = i;
      s.image[i] = v;
    }
    if (nonfinite) {
      reporter.report(name, image_at + 4 * first_bad,
                      std::to_string(nonfinite) + " non-finite image value(s)");
    }

    const std::uint64_t labels_at = cur.offset();
    const auto labels = cur.take(plane, "label payload");
    const std::uint64_t prov_at = cur.offset();
    const auto prov = cur.take(plane, "provenance payload");
    s.label = LabelMask(h, w);
    s.label.labels.assign(labels.begin(), labels.end());
    s.label.provenance.resize(plane);

    struct Tally {
      std::size_t n = 0;
      std::uint64_t first = 0;
    } bad_label, bad_code, manual_ignore, pseudo_ignore, ignore_labelled;
    auto hit = [](Tally& t, std::uint64_t at) {
      if (t.n++ == 0) t.first = at;
    };
    for (std::size_t p = 0; p < plane; ++p) {
      const std::uint8_t l = labels[p], q = prov[p];
      if (l != kIgnore && l >= classes) hit(bad_label, labels_at + p);
      if (q > 2) {
        hit(bad_code, prov_at + p);
        continue;
      }
      const auto pv = static_cast<Provenance>(q);
      s.label.provenance[p] = pv;
      if (l == kIgnore && pv == Provenance::kManual) hit(manual_ignore, prov_at + p);
      if (l == kIgnore && pv == Provenance::kPseudo) hit(pseudo_ignore, prov_at + p);
      if (l != kIgnore && pv == Provenance::kIgnore) hit(ignore_labelled, prov_at + p);
    }
    auto flush = [&](const Tally& t, const std::string& what) {
      if (t.n) reporter.report(name, t.first, std::to_string(t.n) + " pixel(s) " + what);
    };
    flush(bad_label, "with a label >= class count " + std::to_string(classes));
    flush(bad_code, "with a provenance code outside {0,1,2}");
    flush(manual_ignore, "marked manual on an IGNORE label");
    flush(pseudo_ignore, "marked pseudo on an IGNORE label");
    flush(ignore_labelled, "marked ignore on a labelled pixel");

    s.augmented = s.id.size() >= kAugSuffix.size() &&
                  s.id.compare(s.id.size() - kAugSuffix.size(), kAugSuffix.size(), kAugSuffix) == 0;
    s.annotation_minutes = default_annotation_minutes(s.domain);
    out.items.push_back(std::move(s));
  }
  if (cur.remaining()) {
    reporter.report("", cur.offset(), std::to_string(cur.remaining()) + " trailing byte(s) after the last record");
  }
  return out;
}

}  // namespace

double default_annotation_minutes(Domain domain) {
  switch (domain) {
    case Domain::kRealCoarse:
      return 7.0;
    case Domain::kRealFine:
      return 90.0;
    default:
      return 0.0;
  }
}

std::vector<std::uint8_t> serialize(const SceneDataset& dataset) {
  if (dataset.num_classes <= 0 || dataset.num_classes >= kIgnore) {
    throw DataError("serialize: class count must be in [1, 254]");
  }
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint16_t>(kContainerVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dataset.items.size()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(dataset.num_classes));
  for (const Sample& s : dataset.items) {
    if (s.id.size() > 0xffff) throw DataError("serialize: id longer than 65535 bytes");
    const Tensor& img = s.image;
    if (img.rank() != 3 || img.dim(0) != 3) throw DataError("serialize: '" + s.id + "' image is not [3,H,W]");
    const std::size_t h = img.dim(1), wd = img.dim(2);
    if (h > 0xffff || wd > 0xffff) throw DataError("serialize: '" + s.id + "' image too large");
    if (static_cast<std::size_t>(s.label.height) != h || static_cast<std::size_t>(s.label.width) != wd) {
      throw DataError("serialize: '" + s.id + "' label size differs from image");
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(s.id.size()));
    w.put_bytes(s.id.data(), s.id.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.domain));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(h));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(wd));
    for (std::size_t i = 0; i < img.numel(); ++i) {
      w.put<std::uint32_t>(std::bit_cast<std::uint32_t>(static_cast<float>(img[i])));
    }
    w.put_bytes(s.label.labels.data(), s.label.labels.size());
    LabelMask tracked = s.label;
    if (!tracked.has_provenance()) tracked.mark_manual();
    for (Provenance p : tracked.provenance) w.put<std::uint8_t>(static_cast<std::uint8_t>(p));
  }
  return std::move(w.bytes());
}

SceneDataset parse(std::span<const std::uint8_t> bytes) {
  Reporter strict(nullptr);
  return parse_impl(bytes, strict);
}

std::vector<Violation> verify(std::span<const std::uint8_t> bytes) {
  std::vector<Violation> out;
  Reporter collect(&out);
  try {
    parse_impl(bytes, collect);
  } catch (const DataError& e) {
    // Structural damage: the message already names the offset.
    out.push_back({"", 0, e.what()});
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_container(const std::string& path, const SceneDataset& dataset) {
  const auto bytes = serialize(dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to '" + path + "' failed");
}

SceneDataset read_container(const std::string& path) {
  try {
    return parse(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace c2f
