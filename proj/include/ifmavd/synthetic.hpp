#pragma once

// Planted benchmark generator. Every function holds one guarded sink of one of
// four kinds. In a clean function the sink sits inside the guard; in a
// vulnerable one the guard protects an unrelated float update and the sink
// follows it. Both variants have the same statements, so the label lives in
// control dependence only. The rest of the body is float filler with
// non-sensitive calls plus a few label-independent safe uses of sensitive
// operations.

#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ifmavd/cpg.hpp"
#include "ifmavd/errors.hpp"
#include "ifmavd/manifest.hpp"
#include "ifmavd/rng.hpp"

namespace ifmavd {

enum class PlantedPattern { ArrayWrite = 0, UnclampedCopy, UncheckedAlloc, OverflowSize };
inline constexpr int kPlantedPatternCount = 4;

struct SyntheticConfig {
  int count = 400;
  double vulnerable_rate = 0.5;
  int filler_min = 4;
  int filler_max = 10;
  int max_decoys = 2;  // safe sensitive-API uses per function, drawn uniformly from 0..max_decoys
  std::uint64_t seed = 7;
};

struct PlantedCorpus {
  DatasetManifest manifest;
  std::vector<PlantedPattern> patterns;  // per record
};

namespace detail {

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
  return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

struct PatternText {
  std::vector<std::string> setup;  // declarations ahead of the guard
  std::string outer, inner;        // nested guard conditions
  std::string sink;
};

inline PatternText planted_pattern(PlantedPattern p, Rng& rng) {
  static const std::vector<std::string> taint = {"get_input", "next_field", "parse_header", "peek_value", "decode_word"};
  static const std::vector<std::string> idx = {"idx", "pos", "slot", "off", "at"};
  static const std::vector<std::string> len = {"len", "nbytes", "want", "size", "amount"};
  static const std::vector<std::string> buf = {"buf", "table", "cells", "ring", "out"};
  static const std::vector<std::string> ptr = {"p", "node", "blk", "mem", "area"};
  static const std::vector<std::string> cap = {"64", "128", "256", "512"};
  const std::string t = pick(rng, taint), b = pick(rng, buf), c = pick(rng, cap);
  switch (p) {
    case PlantedPattern::ArrayWrite: {
      const std::string i = pick(rng, idx);
      return {{"char " + b + "[" + c + "];", "int " + i + " = " + t + "(src);"},
              i + " >= 0", i + " < " + c,
              b + "[" + i + "] = tag;"};
    }
    case PlantedPattern::UnclampedCopy: {
      const std::string n = pick(rng, len);
      return {{"char " + b + "[" + c + "];", "int " + n + " = " + t + "(src);"},
              n + " > 0", n + " < " + c,
              "memcpy(" + b + ", src, " + n + ");"};
    }
    case PlantedPattern::UncheckedAlloc: {
      const std::string q = pick(rng, ptr), n = pick(rng, len);
      return {{"int " + n + " = " + t + "(src);", "char *" + q + " = malloc(" + n + ");"},
              n + " > 0", q + " != 0",
              "*" + q + " = tag;"};
    }
    case PlantedPattern::OverflowSize: {
      const std::string q = pick(rng, ptr), n = pick(rng, len);
      return {{"int count = " + t + "(src);", "int " + n + " = 0;", "char *" + q + " = 0;"},
              "count > 0", "count < " + c,
              n + " = count * width; " + q + " = malloc(" + n + ");"};
    }
  }
  throw ConfigError("unknown planted pattern");
}

inline std::string filler_statement(Rng& rng, const std::vector<std::string>& vars) {
  static const std::vector<std::string> calls = {"log_value", "update_stats", "notify", "trace_event", "emit_metric"};
  static const std::vector<std::string> consts = {"0.5", "1.5", "2.0", "0.25", "3.0"};
  static const std::vector<std::string> ops = {"+", "-", "*"};
  const std::string a = pick(rng, vars), b = pick(rng, vars), k = pick(rng, consts);
  switch (rng.below(5)) {
    case 0: return a + " = " + a + " " + pick(rng, ops) + " " + b + ";";
    case 1: return a + " = " + b + " * " + k + ";";
    case 2: return pick(rng, calls) + "(" + a + ");";
    case 3: return "if (" + a + " > " + k + ") { " + b + " = " + b + " - " + k + "; }";
    default: return "while (" + a + " > " + k + ") { " + a + " = " + a + " / 2.0; }";
  }
}

// Safe uses of sensitive operations, independent of the label.
// Neither touches the float filler, so their slices keep a fixed shape.
inline std::vector<std::string> decoy(Rng& rng) {
  if (rng.below(2) == 0) return {"char scratch[32];", "memcpy(scratch, src, 16);"};
  return {"char cache[8];", "if (width > 2) { cache[3] = tag; }"};
}

}  // namespace detail

/// Generates `count` labeled mini-C functions; labels are shuffled before generation.
inline PlantedCorpus generate_planted(const SyntheticConfig& cfg) {
  if (cfg.count < 1 || cfg.filler_min < 0 || cfg.filler_max < cfg.filler_min || cfg.max_decoys < 0 || cfg.vulnerable_rate < 0 ||
      cfg.vulnerable_rate > 1)
    throw ConfigError("invalid synthetic corpus settings");
  static const std::vector<std::string> names = {"handle", "process", "load", "apply", "store", "fill", "scan"};
  static const std::vector<std::string> fvars = {"acc", "gain", "ratio", "scale", "mean", "temp"};
  Rng rng(cfg.seed);
  const auto n = static_cast<std::size_t>(cfg.count);
  const auto n_vuln = static_cast<std::size_t>(cfg.vulnerable_rate * static_cast<double>(n) + 0.5);
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < n_vuln; ++i) labels[i] = 1;
  rng.shuffle(labels);

  PlantedCorpus out;
  out.manifest.provenance = "planted synthetic corpus, seed " + std::to_string(cfg.seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = static_cast<PlantedPattern>(rng.below(kPlantedPatternCount));
    const auto pat = detail::planted_pattern(kind, rng);
    std::vector<std::string> vars;
    for (const auto& v : fvars)
      if (rng.bernoulli(0.6) || vars.size() < 2) vars.push_back(v);

    std::string benign;
    {
      const std::string a = detail::pick(rng, vars);
      benign = a + " = " + a + " * 0.5;";
    }
    std::vector<std::string> guarded;
    if (labels[i]) {
      guarded = {"if (" + pat.outer + ") { if (" + pat.inner + ") { " + benign + " } }", pat.sink};
    } else {
      guarded = {"if (" + pat.outer + ") { if (" + pat.inner + ") { " + pat.sink + " } }", benign};
    }

    const int fill = cfg.filler_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.filler_max - cfg.filler_min + 1)));
    std::vector<std::string> body;
    for (int k = 0; k < fill; ++k) body.push_back(detail::filler_statement(rng, vars));
    // Up to two distinct decoys, each kept contiguous at a random point.
    const int n_decoys = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_decoys + 1)));
    std::set<std::string> used;
    for (int k = 0; k < n_decoys; ++k) {
      auto dec = detail::decoy(rng);
      if (!used.insert(dec.front()).second) continue;
      std::string joined;
      for (const auto& line : dec) joined += (joined.empty() ? "" : "\n  ") + line;
      body.insert(body.begin() + static_cast<std::ptrdiff_t>(rng.below(body.size() + 1)), joined);
    }
    // Setup goes at a random point, the guarded pair somewhere after it.
    const auto setup_at = static_cast<std::size_t>(rng.below(body.size() + 1));
    const auto guard_at = setup_at + static_cast<std::size_t>(rng.below(body.size() - setup_at + 1));
    std::vector<std::string> stmts;
    for (std::size_t k = 0; k <= body.size(); ++k) {
      if (k == setup_at) stmts.insert(stmts.end(), pat.setup.begin(), pat.setup.end());
      if (k == guard_at) stmts.insert(stmts.end(), guarded.begin(), guarded.end());
      if (k < body.size()) stmts.push_back(body[k]);
    }

    std::string src = "void " + detail::pick(rng, names) + "_" + std::to_string(i) + "(char *src, char tag, int width) {\n";
    for (const auto& v : vars) src += "  float " + v + " = 1.0;\n";
    for (const auto& s : stmts) src += "  " + s + "\n";
    src += "}\n";

    char id[32];
    std::snprintf(id, sizeof id, "planted_%04zu", i);
    out.manifest.records.push_back({id, labels[i] ? Label::Vulnerable : Label::Clean, std::move(src), std::nullopt});
    out.patterns.push_back(kind);
  }
  return out;
}

}  // namespace ifmavd
