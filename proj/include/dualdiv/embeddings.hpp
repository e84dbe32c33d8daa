// Copyright 2026 The dualdiv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dualdiv/error.hpp"

namespace dualdiv {

using Index = std::size_t;

enum class Role { corpus, query };
enum class Format { text, binary };

inline std::string_view to_string(Role role) {
  return role == Role::corpus ? "corpus" : "query";
}

inline std::string_view to_string(Format format) {
  return format == Format::text ? "text" : "binary";
}

inline Format parse_format(std::string_view name) {
  if (name == "text") return Format::text;
  if (name == "binary") return Format::binary;
  throw ConfigError("unknown embedding format '" + std::string(name) + "'");
}

/// One embedded datapoint: the raw vector as ingested plus its L2 norm and
/// direction. `unit` is empty only for records that were never normalized,
/// which `make_record` never produces.
struct EmbeddingRecord {
  std::string id;
  std::optional<std::string> label;
  std::vector<float> vector;
  double norm = 0.0;
  std::vector<double> unit;
};

/// Builds a record from a raw vector. Rejects non-finite components and the
/// zero vector, which has no cosine direction.
inline EmbeddingRecord make_record(std::string id,
                                   std::optional<std::string> label,
                                   std::vector<float> vector) {
  double sq = 0.0;
  for (float v : vector) {
    if (!std::isfinite(v)) {
      throw DataError("record '" + id + "': non-finite vector component");
    }
    sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0)) {
    throw DataError("record '" + id + "': zero-norm vector");
  }
  std::vector<double> unit(vector.size());
  for (std::size_t i = 0; i < vector.size(); ++i) {
    unit[i] = static_cast<double>(vector[i]) / norm;
  }
  if (label && label->empty()) label.reset();
  return EmbeddingRecord{std::move(id), std::move(label), std::move(vector),
                         norm, std::move(unit)};
}

/// Ordered collection of records sharing one dimension and unique ids.
/// The dimension is 0 until the first record is added.
class EmbeddingSet {
 public:
  explicit EmbeddingSet(Role role = Role::corpus) : role_(role) {}

  EmbeddingSet(Role role, std::vector<EmbeddingRecord> records) : role_(role) {
    records_.reserve(records.size());
    for (auto& r : records) add(std::move(r));
  }

  void add(EmbeddingRecord record) {
    if (records_.empty() && dimension_ == 0) {
      if (record.vector.empty()) {
        throw DataError("record '" + record.id + "': empty vector");
      }
      dimension_ = record.vector.size();
    } else if (record.vector.size() != dimension_) {
      throw DataError("record '" + record.id + "': dimension mismatch (expected " +
                      std::to_string(dimension_) + ", got " +
                      std::to_string(record.vector.size()) + ")");
    }
    if (!by_id_.emplace(record.id, records_.size()).second) {
      throw DataError("duplicate record id '" + record.id + "'");
    }
    records_.push_back(std::move(record));
  }

  Role role() const { return role_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const EmbeddingRecord& operator[](Index i) const { return records_[i]; }
  const std::vector<EmbeddingRecord>& records() const { return records_; }

  std::optional<Index> find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

 private:
  Role role_;
  std::size_t dimension_ = 0;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, Index> by_id_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<float> parse_floats(std::string_view field, std::size_t line) {
  std::vector<float> out;
  while (true) {
    const auto comma = field.find(',');
    const auto token = trim(field.substr(0, comma));
    float value = 0.0f;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    if (!token.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (token.empty() || ec != std::errc() || ptr != last) {
      throw DataError("line " + std::to_string(line) + ": bad number '" +
                      std::string(token) + "'");
    }
    out.push_back(value);
    if (comma == std::string_view::npos) break;
    field.remove_prefix(comma + 1);
  }
  return out;
}

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little,
                "binary I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError(std::string("truncated binary input while reading ") + what);
  }
  return value;
}

inline std::string read_string(std::istream& in, const char* what) {
  const auto len = read_le<std::uint32_t>(in, what);
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) {
    throw DataError(std::string("truncated binary input while reading ") + what);
  }
  return s;
}

inline void write_string(std::ostream& out, std::string_view s) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace detail

inline constexpr std::string_view kBinaryMagic = "DDIV1";

// Text format: `id<TAB>label<TAB>f1,f2,...` per line.
inline EmbeddingSet load_text(std::istream& in, Role role) {
  EmbeddingSet set(role);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw DataError("line " + std::to_string(lineno) +
                      ": expected 3 tab-separated fields");
    }
    std::string id = line.substr(0, t1);
    std::string label = line.substr(t1 + 1, t2 - t1 - 1);
    if (id.empty()) {
      throw DataError("line " + std::to_string(lineno) + ": empty id");
    }
    auto values = detail::parse_floats(std::string_view(line).substr(t2 + 1), lineno);
    try {
      set.add(make_record(std::move(id), std::move(label), std::move(values)));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return set;
}

inline EmbeddingSet load_binary(std::istream& in, Role role) {
  char magic[5];
  if (!in.read(magic, 5) || std::string_view(magic, 5) != kBinaryMagic) {
    throw DataError("binary input: bad magic (expected DDIV1)");
  }
  const auto n = detail::read_le<std::uint32_t>(in, "record count");
  const auto d = detail::read_le<std::uint32_t>(in, "dimension");
  if (n > 0 && d == 0) throw DataError("binary input: zero dimension");
  std::vector<std::string> ids(n), labels(n);
  for (auto& id : ids) id = detail::read_string(in, "id");
  for (auto& label : labels) label = detail::read_string(in, "label");
  EmbeddingSet set(role);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::vector<float> values(d);
    for (auto& v : values) v = detail::read_le<float>(in, "vector data");
    set.add(make_record(std::move(ids[i]), std::move(labels[i]), std::move(values)));
  }
  return set;
}

inline EmbeddingSet load_embeddings(std::istream& in, Format format,
                                    Role role = Role::corpus) {
  return format == Format::text ? load_text(in, role) : load_binary(in, role);
}

inline EmbeddingSet load_embeddings_file(const std::filesystem::path& path,
                                         Format format, Role role = Role::corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return load_embeddings(in, format, role);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_text(std::ostream& out, const EmbeddingSet& set) {
  char buf[32];
  for (const auto& r : set.records()) {
    out << r.id << '\t' << r.label.value_or("") << '\t';
    for (std::size_t i = 0; i < r.vector.size(); ++i) {
      if (i > 0) out << ',';
      auto res = std::to_chars(buf, buf + sizeof(buf), r.vector[i]);
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

inline void write_binary(std::ostream& out, const EmbeddingSet& set) {
  out.write(kBinaryMagic.data(), static_cast<std::streamsize>(kBinaryMagic.size()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dimension()));
  for (const auto& r : set.records()) detail::write_string(out, r.id);
  for (const auto& r : set.records()) detail::write_string(out, r.label.value_or(""));
  for (const auto& r : set.records()) {
    for (float v : r.vector) detail::write_le<float>(out, v);
  }
}

inline void write_embeddings(std::ostream& out, const EmbeddingSet& set, Format format) {
  if (format == Format::text) {
    write_text(out, set);
  } else {
    write_binary(out, set);
  }
}

}  // namespace dualdiv
