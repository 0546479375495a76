#pragma once

// Run reports and prediction records.
//
// The report JSON holds only quantities fixed by (manifest, config, seed), so two
// identical runs write identical bytes. Wall-clock stage timings go to a sidecar
// file next to it.

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ifmavd/config.hpp"
#include "ifmavd/errors.hpp"
#include "ifmavd/manifest.hpp"
#include "ifmavd/metrics.hpp"
#include "ifmavd/split.hpp"

namespace ifmavd {

inline constexpr int kReportFormatVersion = 1;
inline constexpr int kPredictionFormatVersion = 1;

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

struct SplitMetrics {
  Metrics train, val, test;
  friend bool operator==(const SplitMetrics&, const SplitMetrics&) = default;
};

struct RunReport {
  nlohmann::json config;  // echo of the effective configuration
  std::size_t functions = 0, vulnerable = 0;
  std::size_t train_size = 0, val_size = 0, test_size = 0;
  std::size_t behaviors = 0, clusters = 0, hyperedges = 0, singleton_edges = 0;
  int intra_best_epoch = 0;
  double intra_best_val_f = 0, intra_final_loss = 0;
  int detector_best_epoch = 0;
  double detector_initial_val_f = 0, detector_best_val_f = 0, detector_final_loss = 0;
  SplitMetrics detector;
  SplitMetrics baseline;  // logistic regression on the same intra-function features
  std::string bundle_sha256;
  std::vector<StageTiming> timings;  // not part of report_to_json
};

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"tp", m.tp},           {"fp", m.fp},
          {"fn", m.fn},           {"tn", m.tn},
          {"recall", m.recall},   {"precision", m.precision},
          {"f_measure", m.f_measure}};
}

inline Metrics metrics_from_json(const nlohmann::json& j) {
  try {
    return metrics_from_counts(j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("fn").get<std::size_t>(),
                               j.at("tn").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("metrics", e.what());
  }
}

inline nlohmann::json split_metrics_to_json(const SplitMetrics& s) {
  return {{"train", metrics_to_json(s.train)}, {"val", metrics_to_json(s.val)}, {"test", metrics_to_json(s.test)}};
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["format_version"] = kReportFormatVersion;
  j["config"] = r.config;
  j["corpus"] = {{"functions", r.functions},
                 {"vulnerable", r.vulnerable},
                 {"split", {{"train", r.train_size}, {"val", r.val_size}, {"test", r.test_size}}}};
  j["hypergraph"] = {{"behaviors", r.behaviors},
                     {"clusters", r.clusters},
                     {"hyperedges", r.hyperedges},
                     {"singleton_edges", r.singleton_edges}};
  j["training"] = {{"intra", {{"best_epoch", r.intra_best_epoch}, {"best_val_f", r.intra_best_val_f}, {"final_train_loss", r.intra_final_loss}}},
                   {"detector",
                    {{"best_epoch", r.detector_best_epoch},
                     {"initial_val_f", r.detector_initial_val_f},
                     {"best_val_f", r.detector_best_val_f},
                     {"final_train_loss", r.detector_final_loss}}}};
  j["metrics"] = split_metrics_to_json(r.detector);
  j["baseline"] = split_metrics_to_json(r.baseline);
  j["bundle_sha256"] = r.bundle_sha256;
  return j;
}

inline std::string report_text(const RunReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline nlohmann::json timings_to_json(const std::vector<StageTiming>& t) {
  nlohmann::json arr = nlohmann::json::array();
  double total = 0;
  for (const auto& s : t) {
    arr.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    total += s.seconds;
  }
  return {{"format_version", kReportFormatVersion}, {"stages", arr}, {"total_seconds", total}};
}

inline std::string timings_path(const std::string& report_path) { return report_path + ".timings.json"; }

/// Writes the report to `path` and the stage timings to `path`.timings.json.
inline void emit_report(const RunReport& r, const std::string& path) {
  write_text_file(path, report_text(r));
  write_text_file(timings_path(path), timings_to_json(r.timings).dump(2) + "\n");
}

inline nlohmann::json load_report_json(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path, e.what());
  }
  if (!j.is_object() || !j.contains("format_version") || j["format_version"] != kReportFormatVersion)
    throw VersionError(path + ": not a version " + std::to_string(kReportFormatVersion) + " report");
  return j;
}

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

inline void metrics_table(std::ostringstream& out, const nlohmann::json& block) {
  out << "  split   TP    FP    FN    TN    recall  precision  F\n";
  for (const char* s : {"train", "val", "test"}) {
    const Metrics m = metrics_from_json(block.at(s));
    char line[128];
    std::snprintf(line, sizeof line, "  %-6s %-5zu %-5zu %-5zu %-5zu %s  %s     %s\n", s, m.tp, m.fp, m.fn, m.tn,
                  fixed(m.recall).c_str(), fixed(m.precision).c_str(), fixed(m.f_measure).c_str());
    out << line;
  }
}

}  // namespace detail

/// Human-readable summary of a report document (and its timings, when given).
inline std::string format_report(const nlohmann::json& j, const std::optional<nlohmann::json>& timings = std::nullopt) {
  std::ostringstream out;
  try {
    const auto& c = j.at("corpus");
    out << "functions: " << c.at("functions") << " (" << c.at("vulnerable") << " vulnerable), split "
        << c.at("split").at("train") << "/" << c.at("split").at("val") << "/" << c.at("split").at("test") << "\n";
    const auto& h = j.at("hypergraph");
    out << "behaviors: " << h.at("behaviors") << ", clusters: " << h.at("clusters") << ", hyperedges: " << h.at("hyperedges")
        << " + " << h.at("singleton_edges") << " singleton\n";
    out << "\nhypergraph detector\n";
    detail::metrics_table(out, j.at("metrics"));
    out << "\nintra-features baseline\n";
    detail::metrics_table(out, j.at("baseline"));
    out << "\nbundle sha256: " << j.at("bundle_sha256").get<std::string>() << "\n";
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("report", e.what());
  }
  if (timings) {
    out << "\nstage timings (s)\n";
    for (const auto& s : timings->at("stages"))
      out << "  " << s.at("stage").get<std::string>() << ": " << detail::fixed(s.at("seconds").get<double>(), 3) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Prediction records

struct Prediction {
  std::string id;
  double probability = 0;
  int label = 0;  // thresholded
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

inline std::string predictions_to_jsonl(const std::vector<Prediction>& preds) {
  std::string out = nlohmann::json{{"format_version", kPredictionFormatVersion}}.dump() + "\n";
  for (const auto& p : preds)
    out += nlohmann::json{{"id", p.id}, {"probability", p.probability}, {"label", p.label}}.dump() + "\n";
  return out;
}

inline std::vector<Prediction> parse_predictions(std::string_view text) {
  std::vector<Prediction> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(n);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (!header) {
        if (!j.contains("format_version") || j["format_version"] != kPredictionFormatVersion)
          throw VersionError(where + ": predictions need a format_version " + std::to_string(kPredictionFormatVersion) + " header");
        header = true;
        continue;
      }
      Prediction p{j.at("id").get<std::string>(), j.at("probability").get<double>(), j.at("label").get<int>()};
      if (p.label != 0 && p.label != 1) throw SchemaError(where + ".label", "must be 0 or 1");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where, e.what());
    }
  }
  return out;
}

/// Metrics of predictions against manifest labels, joined by id. Every prediction needs a
/// labeled record; records without a prediction are ignored.
inline Metrics evaluate_predictions(const std::vector<Prediction>& preds, const DatasetManifest& labels) {
  std::map<std::string, Label, std::less<>> by_id;
  for (const auto& r : labels.records) by_id.emplace(r.id, r.label);
  std::vector<int> p, y;
  for (const auto& pr : preds) {
    auto it = by_id.find(pr.id);
    if (it == by_id.end()) throw UnknownFunction(pr.id);
    if (it->second == Label::Unknown) throw SchemaError(pr.id + ".label", "no ground-truth label");
    p.push_back(pr.label);
    y.push_back(it->second == Label::Vulnerable ? 1 : 0);
  }
  return evaluate(p, y);
}

}  // namespace ifmavd
