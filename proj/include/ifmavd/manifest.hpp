#pragma once

// Dataset manifests: one JSON object per line. An optional first line
// {"format_version": 1, "provenance": "..."} is the header; every other line is
// {"id": ..., "label": "vulnerable"|"clean"|"unknown", "source": "..."} or the
// same with "cpg": "<path to a CPG document, relative to the manifest>".

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ifmavd/config.hpp"
#include "ifmavd/cpg.hpp"
#include "ifmavd/errors.hpp"
#include "ifmavd/minic.hpp"

namespace ifmavd {

inline constexpr int kManifestFormatVersion = 1;

struct ManifestRecord {
  std::string id;
  Label label = Label::Unknown;
  std::optional<std::string> source;
  std::optional<std::string> cpg_path;
};

struct DatasetManifest {
  std::string provenance;
  std::vector<ManifestRecord> records;
  std::string base_dir;  // cpg paths resolve against this; empty means the working directory
};

namespace detail {

inline ManifestRecord record_from_json(const nlohmann::json& j, std::size_t line) {
  const std::string where = "line " + std::to_string(line);
  if (!j.is_object()) throw SchemaError(where, "record must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (k != "id" && k != "label" && k != "source" && k != "cpg") throw SchemaError(where, "unknown key '" + k + "'");
  ManifestRecord r;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string() || id->get<std::string>().empty())
    throw SchemaError(where + ".id", "missing or not a non-empty string");
  r.id = id->get<std::string>();
  if (auto l = j.find("label"); l != j.end()) {
    auto parsed = l->is_string() ? label_from_string(l->get<std::string>()) : std::nullopt;
    if (!parsed) throw SchemaError(where + ".label", "must be 'vulnerable', 'clean' or 'unknown'");
    r.label = *parsed;
  }
  auto src = j.find("source");
  auto cpg = j.find("cpg");
  if ((src == j.end()) == (cpg == j.end())) throw SchemaError(where, "record needs exactly one of 'source' and 'cpg'");
  if (src != j.end()) {
    if (!src->is_string()) throw SchemaError(where + ".source", "must be a string");
    r.source = src->get<std::string>();
  } else {
    if (!cpg->is_string()) throw SchemaError(where + ".cpg", "must be a path string");
    r.cpg_path = cpg->get<std::string>();
  }
  return r;
}

}  // namespace detail

inline DatasetManifest parse_manifest(std::string_view text, std::string base_dir = {}) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  std::set<std::string> ids;
  std::size_t line_no = 0, start = 0;
  bool first = true;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError("line " + std::to_string(line_no), e.what());
    }
    if (first && j.is_object() && j.contains("format_version") && !j.contains("id")) {
      first = false;
      const auto& v = j["format_version"];
      if (!v.is_number_integer() || v.get<int>() != kManifestFormatVersion)
        throw VersionError("unsupported manifest format_version");
      if (auto p = j.find("provenance"); p != j.end() && p->is_string()) m.provenance = p->get<std::string>();
      continue;
    }
    first = false;
    auto r = detail::record_from_json(j, line_no);
    if (!ids.insert(r.id).second) throw SchemaError("line " + std::to_string(line_no) + ".id", "duplicate id '" + r.id + "'");
    m.records.push_back(std::move(r));
  }
  return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_manifest(read_text_file(path), dir);
}

inline std::string manifest_to_jsonl(const DatasetManifest& m) {
  std::string out = nlohmann::json{{"format_version", kManifestFormatVersion}, {"provenance", m.provenance}}.dump() + "\n";
  for (const auto& r : m.records) {
    nlohmann::json j{{"id", r.id}, {"label", std::string(to_string(r.label))}};
    if (r.source) j["source"] = *r.source;
    if (r.cpg_path) j["cpg"] = *r.cpg_path;
    out += j.dump() + "\n";
  }
  return out;
}

/// Labels of every record as 0/1. Throws SchemaError naming the first unlabeled record.
inline std::vector<int> binary_labels(const DatasetManifest& m) {
  std::vector<int> y;
  y.reserve(m.records.size());
  for (const auto& r : m.records) {
    if (r.label == Label::Unknown) throw SchemaError(r.id + ".label", "training needs 'vulnerable' or 'clean'");
    y.push_back(r.label == Label::Vulnerable ? 1 : 0);
  }
  return y;
}

/// Parses or loads one record into a CPG whose function_id is the record id and whose
/// label is the record label.
inline Cpg ingest_record(const ManifestRecord& r, const std::string& base_dir = {}) {
  Cpg g;
  if (r.source) {
    g = minic::parse_function(*r.source, r.id);
  } else {
    std::filesystem::path p(*r.cpg_path);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    g = load_cpg(read_text_file(p.string()));
  }
  g.function_id = r.id;
  g.label = r.label;
  return g;
}

}  // namespace ifmavd
