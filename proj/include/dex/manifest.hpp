/*
 * Copyright 2026 The DeX Engine Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Line-delimited manifest format.
//
//   line 1:  {"name": ..., "dimension": d, "concept_library": [...]?,
//             "embedding_file": "rows.f32"?, "embedding_index": "rows.idx"?}
//   line k:  {"id": ..., "label": "pr"|"pu", "embedding": [d floats]?,
//             "extracted_tags": [...], "detected_tags": [...], "description": ...?}
//
// When the header names an embedding_file, records may omit "embedding"; their
// vectors are read from the sidecar: little-endian float32, row-major, one row
// of d values per image, with the index file holding one "<id>\t<row>" line per
// image. Sidecar paths are relative to the manifest's directory.
//
// Text embedding tables share the layout: a header {"dimension": d} followed by
// {"text": ..., "embedding": [...]} lines keyed by canonical text.

#ifndef DEX_MANIFEST_HPP
#define DEX_MANIFEST_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dex/core.hpp"

namespace dex {

using json = nlohmann::json;

namespace detail {

inline json parse_line(const std::string& line, std::size_t record) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(record, "", std::string("malformed JSON: ") + e.what());
  }
}

inline const json& require_field(const json& obj, const char* field, std::size_t record) {
  if (!obj.is_object()) throw ParseError(record, "", "expected a JSON object");
  auto it = obj.find(field);
  if (it == obj.end()) throw ParseError(record, field, "missing field");
  return *it;
}

inline std::string read_string(const json& obj, const char* field, std::size_t record) {
  const json& v = require_field(obj, field, record);
  if (!v.is_string()) throw ParseError(record, field, "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> read_floats(const json& v, const char* field, std::size_t record) {
  if (!v.is_array()) throw ParseError(record, field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw ParseError(record, field, "expected an array of numbers");
    const double d = x.get<double>();
    if (!std::isfinite(d)) throw ParseError(record, field, "non-finite value");
    out.push_back(d);
  }
  return out;
}

inline std::vector<std::string> read_tags(const json& obj, const char* field, std::size_t record,
                                          bool required) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    if (required) throw ParseError(record, field, "missing field");
    return {};
  }
  if (!it->is_array()) throw ParseError(record, field, "expected an array of strings");
  std::vector<std::string> raw;
  for (const auto& t : *it) {
    if (!t.is_string()) throw ParseError(record, field, "expected an array of strings");
    raw.push_back(t.get<std::string>());
  }
  try {
    return canonicalize_tags(raw);
  } catch (const TagError& e) {
    throw ParseError(record, field, e.what());
  }
}

inline std::vector<std::string> non_empty_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

inline float load_le_float(const unsigned char* p) {
  std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                       (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void store_le_float(float value, unsigned char* p) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu);
}

// Reads the sidecar embedding matrix and its id -> row index.
inline std::unordered_map<std::string, std::vector<double>> read_sidecar(
    const std::filesystem::path& matrix_path, const std::filesystem::path& index_path,
    std::size_t dimension) {
  std::ifstream matrix(matrix_path, std::ios::binary);
  if (!matrix) throw ParseError(ParseError::kHeader, "embedding_file", "cannot open " + matrix_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(matrix)), std::istreambuf_iterator<char>());
  const std::size_t row_bytes = dimension * 4;
  if (bytes.size() % row_bytes != 0) {
    throw ParseError(ParseError::kHeader, "embedding_file",
                     "size " + std::to_string(bytes.size()) + " is not a multiple of " +
                         std::to_string(row_bytes) + " bytes");
  }
  const std::size_t rows = bytes.size() / row_bytes;

  std::ifstream index(index_path);
  if (!index) throw ParseError(ParseError::kHeader, "embedding_index", "cannot open " + index_path.string());
  std::unordered_map<std::string, std::vector<double>> out;
  std::size_t line_no = 0;
  for (const auto& line : non_empty_lines(index)) {
    const auto tab = line.find('\t');
    std::size_t row = 0;
    try {
      if (tab == std::string::npos) throw std::invalid_argument("no tab");
      row = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(ParseError::kHeader, "embedding_index",
                       "malformed index line " + std::to_string(line_no));
    }
    if (row >= rows) {
      throw ParseError(ParseError::kHeader, "embedding_index",
                       "row " + std::to_string(row) + " out of range (" + std::to_string(rows) + " rows)");
    }
    std::vector<double> v(dimension);
    const unsigned char* base = bytes.data() + row * row_bytes;
    for (std::size_t j = 0; j < dimension; ++j) v[j] = load_le_float(base + 4 * j);
    out.emplace(line.substr(0, tab), std::move(v));
    ++line_no;
  }
  return out;
}

}  // namespace detail

inline json to_json(const ImageRecord& r, bool with_embedding = true) {
  json j;
  j["id"] = r.id;
  j["label"] = std::string(to_string(r.label));
  if (with_embedding) j["embedding"] = r.embedding.raw();
  j["extracted_tags"] = r.extracted_tags;
  j["detected_tags"] = r.detected_tags;
  if (r.description) j["description"] = *r.description;
  return j;
}

// Parses a manifest from a stream. `base_dir` resolves sidecar paths.
inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
  const auto lines = detail::non_empty_lines(in);
  if (lines.empty()) throw ParseError(ParseError::kHeader, "", "empty manifest");

  constexpr auto kHeader = ParseError::kHeader;
  const json header = detail::parse_line(lines[0], kHeader);
  DatasetManifest m;
  m.name = detail::read_string(header, "name", kHeader);
  const json& dim = detail::require_field(header, "dimension", kHeader);
  if (!dim.is_number_integer() || dim.get<long long>() <= 0) {
    throw ParseError(kHeader, "dimension", "expected a positive integer");
  }
  m.dimension = dim.get<std::size_t>();
  if (header.contains("concept_library")) {
    m.concept_library = detail::read_tags(header, "concept_library", kHeader, true);
  }

  std::unordered_map<std::string, std::vector<double>> sidecar;
  if (header.contains("embedding_file")) {
    const auto matrix = base_dir / detail::read_string(header, "embedding_file", kHeader);
    const auto index = base_dir / detail::read_string(header, "embedding_index", kHeader);
    sidecar = detail::read_sidecar(matrix, index, m.dimension);
  }

  m.records.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t rec = i - 1;
    const json j = detail::parse_line(lines[i], rec);
    ImageRecord r;
    r.id = detail::read_string(j, "id", rec);
    if (r.id.empty()) throw ParseError(rec, "id", "empty id");
    try {
      r.label = parse_label(detail::read_string(j, "label", rec));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(rec, "label", e.what());
    }
    if (j.contains("embedding")) {
      r.embedding = EmbeddingVector(detail::read_floats(j["embedding"], "embedding", rec));
    } else if (auto it = sidecar.find(r.id); it != sidecar.end()) {
      r.embedding = EmbeddingVector(it->second);
    } else {
      throw ParseError(rec, "embedding", "missing field and no sidecar row for '" + r.id + "'");
    }
    r.extracted_tags = detail::read_tags(j, "extracted_tags", rec, true);
    r.detected_tags = detail::read_tags(j, "detected_tags", rec, false);
    if (j.contains("description")) {
      if (!j["description"].is_string()) throw ParseError(rec, "description", "expected a string");
      r.description = j["description"].get<std::string>();
    }
    m.records.push_back(std::move(r));
  }
  m.validate_and_index();
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.parent_path());
}

inline void write_manifest(const DatasetManifest& m, std::ostream& out) {
  json header;
  header["name"] = m.name;
  header["dimension"] = m.dimension;
  if (m.concept_library) header["concept_library"] = *m.concept_library;
  out << header.dump() << '\n';
  for (const auto& r : m.records) out << to_json(r).dump() << '\n';
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write manifest '" + path.string() + "'");
  write_manifest(m, out);
}

// Writes the manifest with embeddings in a float32 sidecar next to `path`.
// Values are narrowed to float32.
inline void save_manifest_with_sidecar(const DatasetManifest& m, const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  const std::string matrix_name = stem + ".f32";
  const std::string index_name = stem + ".idx";
  const auto dir = path.parent_path();

  std::ofstream matrix(dir / matrix_name, std::ios::binary);
  std::ofstream index(dir / index_name);
  std::vector<unsigned char> row(m.dimension * 4);
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    for (std::size_t j = 0; j < m.dimension; ++j) {
      detail::store_le_float(static_cast<float>(m.records[i].embedding[j]), row.data() + 4 * j);
    }
    matrix.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    index << m.records[i].id << '\t' << i << '\n';
  }

  std::ofstream out(path);
  json header;
  header["name"] = m.name;
  header["dimension"] = m.dimension;
  if (m.concept_library) header["concept_library"] = *m.concept_library;
  header["embedding_file"] = matrix_name;
  header["embedding_index"] = index_name;
  out << header.dump() << '\n';
  for (const auto& r : m.records) out << to_json(r, false).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Text embedding tables
// ---------------------------------------------------------------------------

struct TextEmbeddingTable {
  std::size_t dimension = 0;
  std::map<std::string, EmbeddingVector> entries;
};

inline TextEmbeddingTable parse_text_table(std::istream& in) {
  const auto lines = detail::non_empty_lines(in);
  if (lines.empty()) throw ParseError(ParseError::kHeader, "", "empty text embedding table");
  const json header = detail::parse_line(lines[0], ParseError::kHeader);
  const json& dim = detail::require_field(header, "dimension", ParseError::kHeader);
  if (!dim.is_number_integer() || dim.get<long long>() <= 0) {
    throw ParseError(ParseError::kHeader, "dimension", "expected a positive integer");
  }
  TextEmbeddingTable table;
  table.dimension = dim.get<std::size_t>();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t rec = i - 1;
    const json j = detail::parse_line(lines[i], rec);
    std::string text;
    try {
      text = canonicalize_tag(detail::read_string(j, "text", rec));
    } catch (const TagError& e) {
      throw ParseError(rec, "text", e.what());
    }
    EmbeddingVector v(detail::read_floats(detail::require_field(j, "embedding", rec), "embedding", rec));
    if (v.size() != table.dimension) {
      throw ParseError(rec, "embedding",
                       "dimension mismatch: expected " + std::to_string(table.dimension) + ", got " +
                           std::to_string(v.size()));
    }
    if (!table.entries.emplace(text, std::move(v)).second) {
      throw ParseError(rec, "text", "duplicate text '" + text + "'");
    }
  }
  return table;
}

inline TextEmbeddingTable load_text_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open text embedding table '" + path.string() + "'");
  return parse_text_table(in);
}

inline void write_text_table(const TextEmbeddingTable& table, std::ostream& out) {
  out << json{{"dimension", table.dimension}}.dump() << '\n';
  for (const auto& [text, v] : table.entries) {
    out << json{{"text", text}, {"embedding", v.raw()}}.dump() << '\n';
  }
}

}  // namespace dex

#endif  // DEX_MANIFEST_HPP
