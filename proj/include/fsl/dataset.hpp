#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fsl/errors.hpp"
#include "fsl/linalg.hpp"

// Dataset containers and file I/O.
//
// FSLE binary container (all integers little-endian):
//   magic      4 bytes   'F' 'S' 'L' 'E'
//   version    u16       1
//   n          u32       number of examples
//   d          u32       feature dimension
//   has_labels u8        0 or 1
//   labels     n x i32   present iff has_labels
//   features   n x d     f64, row-major
//
// CSV alternative: header "label,f0,f1,...,f{d-1}", one example per row,
// features printed with 17 significant digits so doubles round-trip exactly.

namespace fsl {

struct FeatureSet {
  Matrix features;                       // n x d
  std::vector<int> labels;               // n class ids, contiguous 0..C-1
  std::vector<std::string> class_names;  // optional, size C when present
  std::string source;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }

  int num_classes() const {
    int c = -1;
    for (int y : labels) c = std::max(c, y);
    return c + 1;
  }

  void validate() const {
    if (features.rows() == 0) raise(errc::empty_set, "feature set has no examples");
    if (labels.size() != features.rows())
      raise(errc::shape_error, "labels/features row count mismatch");
    std::set<int> seen(labels.begin(), labels.end());
    if (*seen.begin() < 0) raise(errc::invalid_label, "negative class id");
    int expect = 0;
    for (int y : seen)
      if (y != expect++)
        raise(errc::invalid_label, "class ids not contiguous: missing " + std::to_string(expect - 1));
    if (!class_names.empty() && class_names.size() != seen.size())
      raise(errc::shape_error, "class_names size mismatch");
    if (!all_finite(features)) raise(errc::invalid_input, "non-finite feature value");
  }

  // Examples whose class is in `classes`, with labels remapped to the
  // contiguous 0..|classes|-1 space in sorted original-id order.
  FeatureSet restricted_to(const std::vector<int>& classes) const {
    std::vector<int> sorted = classes;
    std::sort(sorted.begin(), sorted.end());
    std::map<int, int> remap;
    for (int c : sorted) remap.emplace(c, static_cast<int>(remap.size()));
    FeatureSet out;
    out.source = source + "|subset";
    for (std::size_t i = 0; i < size(); ++i) {
      auto it = remap.find(labels[i]);
      if (it == remap.end()) continue;
      out.features.append_row(features.row(i));
      out.labels.push_back(it->second);
    }
    if (out.size() == 0) raise(errc::empty_set, "class restriction selected no examples");
    if (!class_names.empty())
      for (int c : sorted) out.class_names.push_back(class_names[static_cast<std::size_t>(c)]);
    return out;
  }
};

// Disjoint class-id sets for base training / validation / novel evaluation.
struct SplitSpec {
  std::vector<int> base_classes;
  std::vector<int> val_classes;
  std::vector<int> novel_classes;

  void validate(int total_classes = -1) const {
    std::set<int> seen;
    auto check = [&](const std::vector<int>& group, const char* name) {
      for (int c : group) {
        if (c < 0 || (total_classes >= 0 && c >= total_classes))
          raise(errc::invalid_config,
                std::string(name) + " class id " + std::to_string(c) + " out of range");
        if (!seen.insert(c).second)
          raise(errc::invalid_config,
                "class " + std::to_string(c) + " appears in two split groups");
      }
    };
    check(base_classes, "base");
    check(val_classes, "val");
    check(novel_classes, "novel");
  }
};

namespace detail {

inline constexpr char kFsleMagic[4] = {'F', 'S', 'L', 'E'};
inline constexpr std::uint16_t kFsleVersion = 1;

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  std::size_t offset() const { return offset_; }

  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      raise(errc::format_error,
            "truncated file at byte offset " + std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
    offset_ += n;
  }

  std::uint8_t u8() {
    std::uint8_t b;
    read(&b, 1);
    return b;
  }

  std::uint16_t u16le() {
    std::uint8_t b[2];
    read(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32le() {
    std::uint8_t b[4];
    read(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::uint64_t u64le() {
    std::uint64_t lo = u32le();
    std::uint64_t hi = u32le();
    return lo | (hi << 32);
  }

  std::int32_t i32le() { return static_cast<std::int32_t>(u32le()); }

  double f64le() { return std::bit_cast<double>(u64le()); }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void write(const void* src, std::size_t n) {
    out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
  }

  void u8(std::uint8_t v) { write(&v, 1); }

  void u16le(std::uint16_t v) {
    std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
    write(b, 2);
  }

  void u32le(std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    write(b, 4);
  }

  void u64le(std::uint64_t v) {
    u32le(static_cast<std::uint32_t>(v));
    u32le(static_cast<std::uint32_t>(v >> 32));
  }

  void i32le(std::int32_t v) { u32le(static_cast<std::uint32_t>(v)); }

  void f64le(double v) { u64le(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ostream& out_;
};

// Remap arbitrary non-negative ids onto 0..C-1 (sorted original-id order).
// Already-contiguous label vectors pass through unchanged.
inline void remap_labels(FeatureSet& set) {
  std::set<int> distinct(set.labels.begin(), set.labels.end());
  if (!distinct.empty() && *distinct.begin() < 0)
    raise(errc::invalid_label, "negative class id in file");
  std::map<int, int> remap;
  bool contiguous = true;
  for (int c : distinct) {
    int next = static_cast<int>(remap.size());
    if (c != next) contiguous = false;
    remap.emplace(c, next);
  }
  if (contiguous) return;
  for (int& y : set.labels) y = remap.at(y);
  if (set.class_names.empty())
    for (int c : distinct) set.class_names.push_back(std::to_string(c));
}

}  // namespace detail

inline void save_feature_set_fsle(const FeatureSet& set, const std::string& path) {
  set.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(errc::format_error, "cannot open " + path + " for writing");
  detail::ByteWriter w(out);
  w.write(detail::kFsleMagic, 4);
  w.u16le(detail::kFsleVersion);
  w.u32le(static_cast<std::uint32_t>(set.size()));
  w.u32le(static_cast<std::uint32_t>(set.dim()));
  w.u8(1);
  for (int y : set.labels) w.i32le(y);
  for (double v : set.features.data()) w.f64le(v);
  if (!out) raise(errc::format_error, "write failed for " + path);
}

inline FeatureSet load_feature_set_fsle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::format_error, "cannot open " + path);
  detail::ByteReader r(in);

  char magic[4];
  r.read(magic, 4);
  if (!std::equal(magic, magic + 4, detail::kFsleMagic))
    raise(errc::format_error, "bad magic at byte offset 0");
  std::uint16_t version = r.u16le();
  if (version != detail::kFsleVersion)
    raise(errc::format_error,
          "unsupported version " + std::to_string(version) + " at byte offset 4");
  std::uint32_t n = r.u32le();
  std::uint32_t d = r.u32le();
  std::uint8_t has_labels = r.u8();
  if (has_labels > 1)
    raise(errc::format_error, "bad has_labels flag at byte offset 14");

  FeatureSet set;
  set.source = path;
  if (has_labels) {
    set.labels.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) set.labels.push_back(r.i32le());
  } else {
    set.labels.assign(n, 0);
  }
  set.features = Matrix(n, d);
  for (double& v : set.features.data()) v = r.f64le();
  if (!r.at_eof())
    raise(errc::format_error, "trailing bytes at offset " + std::to_string(r.offset()));
  detail::remap_labels(set);
  set.validate();
  return set;
}

inline void save_feature_set_csv(const FeatureSet& set, const std::string& path) {
  set.validate();
  std::ofstream out(path);
  if (!out) raise(errc::format_error, "cannot open " + path + " for writing");
  out << "label";
  for (std::size_t j = 0; j < set.dim(); ++j) out << ",f" << j;
  out << "\n";
  char buf[40];
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.labels[i];
    auto row = set.features.row(i);
    for (double v : row) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) raise(errc::format_error, "write failed for " + path);
}

inline FeatureSet load_feature_set_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(errc::format_error, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) raise(errc::format_error, "missing header line");
  if (line.rfind("label", 0) != 0)
    raise(errc::format_error, "header must start with \"label\"");

  FeatureSet set;
  set.source = path;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    long y = std::strtol(p, &end, 10);
    if (end == p) raise(errc::format_error, "bad label on line " + std::to_string(line_no));
    Vec row;
    p = end;
    while (*p == ',') {
      ++p;
      double v = std::strtod(p, &end);
      if (end == p) raise(errc::format_error, "bad value on line " + std::to_string(line_no));
      row.push_back(v);
      p = end;
    }
    if (*p != '\0' && *p != '\r')
      raise(errc::format_error, "trailing junk on line " + std::to_string(line_no));
    set.labels.push_back(static_cast<int>(y));
    set.features.append_row(row);
  }
  if (set.size() == 0) raise(errc::format_error, "no data rows");
  detail::remap_labels(set);
  set.validate();
  return set;
}

// Dispatch on extension: ".csv" is text, everything else FSLE binary.
inline FeatureSet load_feature_set(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
    return load_feature_set_csv(path);
  return load_feature_set_fsle(path);
}

inline void save_feature_set(const FeatureSet& set, const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
    save_feature_set_csv(set, path);
  else
    save_feature_set_fsle(set, path);
}

}  // namespace fsl
