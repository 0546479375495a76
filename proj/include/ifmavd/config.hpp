#pragma once

// Pipeline configuration and its JSON form. Unknown keys are rejected so a
// typo cannot silently fall back to a default.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ifmavd/errors.hpp"
#include "ifmavd/optim.hpp"
#include "ifmavd/slicer.hpp"
#include "ifmavd/split.hpp"
#include "ifmavd/token_embed.hpp"

namespace ifmavd {

inline constexpr int kConfigFormatVersion = 1;

/// Built-in sensitive API list, used when the config names neither a file nor an inline list.
/// config/sensitive_apis.txt carries the same names as an editable starting point.
inline constexpr std::string_view kDefaultSensitiveApis =
    "strcpy\nstrncpy\nstrcat\nstrncat\nmemcpy\nmemmove\nmemset\nsprintf\nvsprintf\nsnprintf\n"
    "gets\nfgets\nscanf\nsscanf\nfscanf\nread\nrecv\nrecvfrom\n"
    "malloc\ncalloc\nrealloc\nalloca\nfree\n";

struct PipelineConfig {
  int dim = 256;      // token embedding and feature width
  int steps = 3;      // GGNN propagation steps
  int clusters = 1000;
  int layers = 2;     // hyperedge convolution layers
  SkipgramConfig skipgram;  // dim and seed are taken from this struct's dim and seed
  std::string api_list_path;
  std::vector<std::string> api_list;  // inline names; win over api_list_path when non-empty
  TrainConfig train;                  // seed is derived per stage from `seed`
  std::uint64_t seed = 1;
  SplitRatios ratios;
  bool stratified = false;
  int kmeans_max_iters = 100;
  int min_members = 1;
  double threshold = 0.5;

  void validate() const {
    if (dim < 1 || steps < 1 || clusters < 1 || layers < 1) throw ConfigError("dim, steps, clusters and layers must be >= 1");
    if (skipgram.window < 1 || skipgram.negatives < 1 || skipgram.epochs < 0 || !(skipgram.learning_rate > 0))
      throw ConfigError("invalid skip-gram settings");
    if (kmeans_max_iters < 1) throw ConfigError("kmeans_max_iters must be >= 1");
    if (min_members < 1) throw ConfigError("min_members must be >= 1");
    if (!(threshold > 0 && threshold < 1)) throw ConfigError("threshold must lie in (0, 1)");
    check_ratios(ratios);
    train.validate();
  }
};

/// Independent seeds for each randomized stage, all derived from the run seed.
enum class Stage : std::uint64_t { Split = 1, Embed, Intra, Cluster, Detector, Baseline };

inline std::uint64_t stage_seed(std::uint64_t seed, Stage s) {
  // splitmix64 finalizer over (seed, stage)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(s);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline SkipgramConfig skipgram_config(const PipelineConfig& c) {
  SkipgramConfig s = c.skipgram;
  s.dim = c.dim;
  s.seed = stage_seed(c.seed, Stage::Embed);
  return s;
}

inline TrainConfig train_config(const PipelineConfig& c, Stage s) {
  TrainConfig t = c.train;
  t.seed = stage_seed(c.seed, s);
  return t;
}

/// The configured API list: inline names, else the named file, else the built-in list.
inline ApiList resolve_api_list(const PipelineConfig& c) {
  if (!c.api_list.empty()) return {c.api_list.begin(), c.api_list.end()};
  if (!c.api_list_path.empty()) return load_api_list(c.api_list_path);
  return parse_api_list(kDefaultSensitiveApis);
}

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + where + k + "'");
  }
}

template <typename T>
void read_opt(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + where + key + "' has the wrong type");
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["format_version"] = kConfigFormatVersion;
  j["dim"] = c.dim;
  j["steps"] = c.steps;
  j["clusters"] = c.clusters;
  j["layers"] = c.layers;
  j["skipgram"] = {{"window", c.skipgram.window},
                   {"negatives", c.skipgram.negatives},
                   {"epochs", c.skipgram.epochs},
                   {"learning_rate", c.skipgram.learning_rate}};
  j["api_list_path"] = c.api_list_path;
  j["api_list"] = c.api_list;
  j["train"] = {{"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"gamma", c.train.gamma},
                {"gamma_mode", std::string(to_string(c.train.gamma_mode))},
                {"decay_step", c.train.decay_step},
                {"weight_decay", c.train.weight_decay},
                {"batch_size", c.train.batch_size}};
  j["seed"] = c.seed;
  j["split"] = {{"train", c.ratios.train}, {"val", c.ratios.val}, {"test", c.ratios.test}, {"stratified", c.stratified}};
  j["kmeans_max_iters"] = c.kmeans_max_iters;
  j["min_members"] = c.min_members;
  j["threshold"] = c.threshold;
  return j;
}

/// Missing keys keep their defaults; the result is validated.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  detail::reject_unknown(j,
                         {"format_version", "dim", "steps", "clusters", "layers", "skipgram", "api_list_path", "api_list",
                          "train", "seed", "split", "kmeans_max_iters", "min_members", "threshold"},
                         "");
  int version = kConfigFormatVersion;
  read_opt(j, "format_version", version, "");
  if (version != kConfigFormatVersion) throw VersionError("unsupported config format_version " + std::to_string(version));

  PipelineConfig c;
  read_opt(j, "dim", c.dim, "");
  read_opt(j, "steps", c.steps, "");
  read_opt(j, "clusters", c.clusters, "");
  read_opt(j, "layers", c.layers, "");
  if (auto it = j.find("skipgram"); it != j.end()) {
    detail::reject_unknown(*it, {"window", "negatives", "epochs", "learning_rate"}, "skipgram.");
    read_opt(*it, "window", c.skipgram.window, "skipgram.");
    read_opt(*it, "negatives", c.skipgram.negatives, "skipgram.");
    read_opt(*it, "epochs", c.skipgram.epochs, "skipgram.");
    read_opt(*it, "learning_rate", c.skipgram.learning_rate, "skipgram.");
  }
  read_opt(j, "api_list_path", c.api_list_path, "");
  read_opt(j, "api_list", c.api_list, "");
  if (auto it = j.find("train"); it != j.end()) {
    detail::reject_unknown(*it, {"epochs", "learning_rate", "gamma", "gamma_mode", "decay_step", "weight_decay", "batch_size"},
                           "train.");
    read_opt(*it, "epochs", c.train.epochs, "train.");
    read_opt(*it, "learning_rate", c.train.learning_rate, "train.");
    read_opt(*it, "gamma", c.train.gamma, "train.");
    std::string mode(to_string(c.train.gamma_mode));
    read_opt(*it, "gamma_mode", mode, "train.");
    if (mode == "lr_decay")
      c.train.gamma_mode = GammaMode::LrDecay;
    else if (mode == "adam_beta1")
      c.train.gamma_mode = GammaMode::AdamBeta1;
    else
      throw ConfigError("train.gamma_mode must be 'lr_decay' or 'adam_beta1'");
    read_opt(*it, "decay_step", c.train.decay_step, "train.");
    read_opt(*it, "weight_decay", c.train.weight_decay, "train.");
    read_opt(*it, "batch_size", c.train.batch_size, "train.");
  }
  read_opt(j, "seed", c.seed, "");
  if (auto it = j.find("split"); it != j.end()) {
    detail::reject_unknown(*it, {"train", "val", "test", "stratified"}, "split.");
    read_opt(*it, "train", c.ratios.train, "split.");
    read_opt(*it, "val", c.ratios.val, "split.");
    read_opt(*it, "test", c.ratios.test, "split.");
    read_opt(*it, "stratified", c.stratified, "split.");
  }
  read_opt(j, "kmeans_max_iters", c.kmeans_max_iters, "");
  read_opt(j, "min_members", c.min_members, "");
  read_opt(j, "threshold", c.threshold, "");
  c.validate();
  return c;
}

inline PipelineConfig parse_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline PipelineConfig load_config(const std::string& path) {
  try {
    return parse_config(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace ifmavd
