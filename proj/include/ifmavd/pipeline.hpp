#pragma once

// End-to-end training and batch detection.
//
// Training order: ingest, split, token embedding, intra-function encoder,
// function features, behavior slices and their features, k-means, hyperedges,
// hypergraph detector, evaluation, bundle. Every stage failure is rethrown as a
// StageError naming the stage and, when known, the function.

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ifmavd/bundle.hpp"
#include "ifmavd/config.hpp"
#include "ifmavd/cpg.hpp"
#include "ifmavd/detector.hpp"
#include "ifmavd/errors.hpp"
#include "ifmavd/ggnn.hpp"
#include "ifmavd/hypergraph.hpp"
#include "ifmavd/kmeans.hpp"
#include "ifmavd/logistic.hpp"
#include "ifmavd/manifest.hpp"
#include "ifmavd/report.hpp"
#include "ifmavd/slicer.hpp"
#include "ifmavd/split.hpp"
#include "ifmavd/token_embed.hpp"

namespace ifmavd {

struct PipelineResult {
  ModelBundle bundle;
  RunReport report;
  SplitMask split;           // the one mask used by every training phase
  Vector probabilities;      // detector output per function, manifest order
  Vector baseline_probabilities;
};

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}
  void start(std::string stage) {
    stage_ = std::move(stage);
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    out_.push_back({stage_, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count()});
  }

 private:
  std::vector<StageTiming>& out_;
  std::string stage_;
  std::chrono::steady_clock::time_point t0_;
};

// Runs `f`, turning any toolkit error into a StageError.
template <typename F>
auto in_stage(const char* stage, const std::string& id, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, id, e.what());
  }
}

inline SplitMetrics split_metrics(const Vector& prob, const std::vector<int>& labels, const SplitMask& split,
                                  double threshold) {
  return {evaluate_rows(prob, labels, indices_of(split, Split::Train), threshold),
          evaluate_rows(prob, labels, indices_of(split, Split::Val), threshold),
          evaluate_rows(prob, labels, indices_of(split, Split::Test), threshold)};
}

/// Behavior feature rows of one function.
inline Matrix behavior_features(const Cpg& g, const ApiList& apis, const Vocabulary& vocab, const EmbeddingTable& table,
                                const GgnnParams& p) {
  const auto subs = behaviors_of(pdg_view(g), g, apis);
  Matrix out(static_cast<Eigen::Index>(subs.size()), p.dim);
  for (std::size_t k = 0; k < subs.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = encode_behavior(subs[k], g, vocab, table, p).transpose();
  return out;
}

}  // namespace detail

/// Ingests every manifest record, tagging failures with the record id.
inline std::vector<Cpg> ingest_manifest(const DatasetManifest& m) {
  std::vector<Cpg> out;
  out.reserve(m.records.size());
  for (const auto& r : m.records) out.push_back(detail::in_stage("ingest", r.id, [&] { return ingest_record(r, m.base_dir); }));
  return out;
}

/// Trains every model on a labeled manifest. Deterministic in (manifest, config).
inline PipelineResult run_pipeline(const DatasetManifest& manifest, const PipelineConfig& config) {
  using detail::in_stage;
  in_stage("config", "", [&] { config.validate(); });
  PipelineResult res;
  RunReport& rep = res.report;
  detail::StageClock clock(rep.timings);
  rep.config = config_to_json(config);

  clock.start("ingest");
  const auto cpgs = ingest_manifest(manifest);
  const auto labels = in_stage("ingest", "", [&] { return binary_labels(manifest); });
  const ApiList apis = in_stage("ingest", "", [&] { return resolve_api_list(config); });
  std::vector<std::string> ids;
  for (const auto& g : cpgs) ids.push_back(g.function_id);
  rep.functions = cpgs.size();
  for (int y : labels) rep.vulnerable += static_cast<std::size_t>(y);
  clock.stop();

  clock.start("split");
  res.split = in_stage("split", "", [&] {
    return split_indices(labels.size(), config.ratios, stage_seed(config.seed, Stage::Split),
                         config.stratified ? &labels : nullptr);
  });
  const SplitMask& split = res.split;
  rep.train_size = indices_of(split, Split::Train).size();
  rep.val_size = indices_of(split, Split::Val).size();
  rep.test_size = indices_of(split, Split::Test).size();
  clock.stop();

  // Token embeddings are unsupervised, so every function's tokens contribute.
  clock.start("embed");
  auto emb = in_stage("embed", "", [&] { return train_skipgram(build_corpus(cpgs), skipgram_config(config)); });
  clock.stop();

  clock.start("intra");
  std::vector<GraphInput> graphs;
  for (const auto& g : cpgs) graphs.push_back(in_stage("intra", g.function_id, [&] { return function_input(g, emb.vocab, emb.table); }));
  const IntraModel intra = in_stage("intra", "", [&] {
    return train_intra(graphs, labels, split, IntraConfig{config.steps, train_config(config, Stage::Intra)});
  });
  rep.intra_best_epoch = intra.best_epoch;
  rep.intra_best_val_f = intra.best_val_f;
  rep.intra_final_loss = intra.train_loss.empty() ? 0.0 : intra.train_loss.back();
  clock.stop();

  clock.start("encode");
  const Matrix x = in_stage("encode", "", [&] { return encode_all(graphs, intra.params); });
  clock.stop();

  clock.start("behaviors");
  std::vector<Matrix> per_fn;
  Eigen::Index n_beh = 0;
  for (const auto& g : cpgs) {
    per_fn.push_back(in_stage("behaviors", g.function_id,
                              [&] { return detail::behavior_features(g, apis, emb.vocab, emb.table, intra.params); }));
    n_beh += per_fn.back().rows();
  }
  Matrix beh(n_beh, config.dim);
  ClusterAssignment owners;
  for (std::size_t i = 0, r = 0; i < per_fn.size(); ++i)
    for (Eigen::Index k = 0; k < per_fn[i].rows(); ++k, ++r) {
      beh.row(static_cast<Eigen::Index>(r)) = per_fn[i].row(k);
      owners.push_back({ids[i], 0});
    }
  rep.behaviors = static_cast<std::size_t>(n_beh);
  clock.stop();

  clock.start("cluster");
  Centroids centroids(0, config.dim);
  if (n_beh > 0) {
    const auto km = in_stage("cluster", "", [&] {
      return kmeans(beh, config.clusters, stage_seed(config.seed, Stage::Cluster), config.kmeans_max_iters);
    });
    centroids = km.centroids;
    for (std::size_t r = 0; r < owners.size(); ++r) owners[r].cluster = km.assignment[r];
  }
  rep.clusters = static_cast<std::size_t>(centroids.rows());
  clock.stop();

  clock.start("hypergraph");
  const HyperedgeSet edges = build_hyperedges(owners, static_cast<std::size_t>(config.min_members));
  const Hypergraph hg = in_stage("hypergraph", "", [&] { return incidence(edges, ids); });
  const ThetaOperator theta = in_stage("hypergraph", "", [&] { return ThetaOperator(hg); });
  rep.hyperedges = edges.size();
  rep.singleton_edges = static_cast<std::size_t>(hg.edge_count()) - edges.size();
  clock.stop();

  clock.start("detector");
  const HgnnModel det = in_stage("detector", "", [&] {
    return train_detector(x, theta, labels, split, train_config(config, Stage::Detector), config.layers, config.threshold);
  });
  rep.detector_best_epoch = det.best_epoch;
  rep.detector_initial_val_f = det.initial_val_f;
  rep.detector_best_val_f = det.best_val_f;
  rep.detector_final_loss = det.train_loss.empty() ? 0.0 : det.train_loss.back();
  clock.stop();

  clock.start("evaluate");
  res.probabilities = forward(x, theta, det.params);
  rep.detector = detail::split_metrics(res.probabilities, labels, split, config.threshold);
  const LogisticModel base = in_stage("evaluate", "", [&] {
    return train_logistic(x, labels, split, train_config(config, Stage::Baseline), config.threshold);
  });
  res.baseline_probabilities = logistic_probabilities(x, base.head);
  rep.baseline = detail::split_metrics(res.baseline_probabilities, labels, split, config.threshold);
  clock.stop();

  clock.start("bundle");
  ModelBundle& b = res.bundle;
  b.config = config;
  b.vocab = std::move(emb.vocab);
  b.table = std::move(emb.table);
  b.ggnn = intra.params;
  b.intra_head = intra.head;
  b.centroids = std::move(centroids);
  b.api_list = apis;
  b.function_ids = ids;
  b.labels = labels;
  b.features = x;
  b.hyperedges = edges;
  b.hgnn = det.params;
  rep.bundle_sha256 = sha256_hex(bundle_to_bytes(b));
  clock.stop();
  return res;
}

// ---------------------------------------------------------------------------
// Detection

struct FunctionError {
  std::string id;
  std::string stage;
  std::string message;
};

struct DetectResult {
  std::vector<Prediction> predictions;  // input order, failed functions omitted
  std::vector<FunctionError> errors;
};

/// Scores a batch of functions against a trained bundle.
///
/// Each function gets intra features and behavior clusters (nearest stored centroid).
/// A function whose id and feature row match a stored training function is that
/// training vertex, with its stored memberships. Any other function becomes a new
/// vertex that joins the stored hyperedge of each of its clusters (or a new
/// hyperedge for a cluster without one); uncovered vertices get singleton edges.
/// One forward pass over training and new vertices then scores the batch.
inline DetectResult detect(const std::vector<Cpg>& functions, const ModelBundle& b,
                           std::optional<double> threshold = std::nullopt) {
  const double tau = threshold.value_or(b.config.threshold);
  if (!(tau > 0 && tau < 1)) throw ConfigError("threshold must lie in (0, 1)");
  DetectResult out;
  if (functions.empty()) return out;

  struct Item {
    std::string id;
    Vector x;
    std::set<int> clusters;
  };
  std::vector<Item> items;
  for (const auto& g : functions) {
    const char* stage = "encode";
    try {
      Item it{g.function_id, encode_function(g, b.vocab, b.table, b.ggnn), {}};
      stage = "behaviors";
      const Matrix beh = detail::behavior_features(g, b.api_list, b.vocab, b.table, b.ggnn);
      if (beh.rows() > 0 && b.centroids.rows() > 0)
        for (int c : assign_new(beh, b.centroids)) it.clusters.insert(c);
      items.push_back(std::move(it));
    } catch (const Error& e) {
      out.errors.push_back({g.function_id, stage, e.what()});
    }
  }
  if (items.empty()) return out;

  std::map<std::string, Eigen::Index, std::less<>> stored;
  for (std::size_t i = 0; i < b.function_ids.size(); ++i) stored.emplace(b.function_ids[i], static_cast<Eigen::Index>(i));

  std::vector<std::string> vertex_ids = b.function_ids;
  std::set<std::string, std::less<>> taken(vertex_ids.begin(), vertex_ids.end());
  std::vector<Eigen::Index> row_of;
  std::vector<const Item*> fresh;
  for (const auto& it : items) {
    auto s = stored.find(it.id);
    if (s != stored.end() && b.features.row(s->second) == it.x.transpose()) {
      row_of.push_back(s->second);
      continue;
    }
    std::string name = "detect:" + std::to_string(fresh.size());
    while (taken.count(name)) name.insert(0, "_");
    taken.insert(name);
    row_of.push_back(static_cast<Eigen::Index>(vertex_ids.size()));
    vertex_ids.push_back(std::move(name));
    fresh.push_back(&it);
  }

  HyperedgeSet edges = b.hyperedges;
  std::map<int, std::size_t> edge_of;
  for (std::size_t e = 0; e < edges.size(); ++e) edge_of.emplace(edges[e].cluster, e);
  std::map<int, std::vector<std::string>> new_edges;
  for (std::size_t k = 0; k < fresh.size(); ++k) {
    const std::string& v = vertex_ids[b.function_ids.size() + k];
    for (int c : fresh[k]->clusters) {
      if (auto e = edge_of.find(c); e != edge_of.end())
        edges[e->second].members.push_back(v);
      else
        new_edges[c].push_back(v);
    }
  }
  for (auto& [c, m] : new_edges) edges.push_back({c, std::move(m)});

  Matrix x(static_cast<Eigen::Index>(vertex_ids.size()), b.ggnn.dim);
  if (b.features.rows() > 0) x.topRows(b.features.rows()) = b.features;
  for (std::size_t k = 0; k < fresh.size(); ++k)
    x.row(b.features.rows() + static_cast<Eigen::Index>(k)) = fresh[k]->x.transpose();

  const Vector prob = forward(x, ThetaOperator(incidence(edges, vertex_ids)), b.hgnn);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double p = prob(row_of[i]);
    out.predictions.push_back({items[i].id, p, p >= tau ? 1 : 0});
  }
  return out;
}

/// Ingests and scores a manifest; records that fail to ingest are reported, not fatal.
inline DetectResult detect(const DatasetManifest& m, const ModelBundle& b, std::optional<double> threshold = std::nullopt) {
  std::vector<Cpg> cpgs;
  std::vector<FunctionError> ingest_errors;
  for (const auto& r : m.records) {
    try {
      cpgs.push_back(ingest_record(r, m.base_dir));
    } catch (const Error& e) {
      ingest_errors.push_back({r.id, "ingest", e.what()});
    }
  }
  DetectResult res = detect(cpgs, b, threshold);
  res.errors.insert(res.errors.begin(), ingest_errors.begin(), ingest_errors.end());
  return res;
}

}  // namespace ifmavd
