#pragma once

// Skip-gram with negative sampling over CPG node token sequences, and node
// embedding as the mean of its token vectors.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ifmavd/cpg.hpp"
#include "ifmavd/errors.hpp"
#include "ifmavd/linalg.hpp"
#include "ifmavd/rng.hpp"

namespace ifmavd {

inline constexpr std::string_view kOovToken = "<unk>";
inline constexpr std::string_view kNumLiteral = "LIT_NUM";
inline constexpr std::string_view kStrLiteral = "LIT_STR";

/// Maps literals to placeholder tokens; identifiers and operators pass through.
inline std::string normalize_token(std::string_view t) {
  if (t.empty()) return std::string(t);
  const char c = t.front();
  if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && t.size() > 1)) return std::string(kNumLiteral);
  if (c == '"' || c == '\'') return std::string(kStrLiteral);
  return std::string(t);
}

using Sentence = std::vector<std::string>;

/// One normalized token sequence per node, in graph then node order.
inline std::vector<Sentence> build_corpus(const std::vector<Cpg>& cpgs) {
  std::vector<Sentence> corpus;
  for (const auto& g : cpgs)
    for (const auto& n : g.nodes) {
      Sentence s;
      s.reserve(n.tokens.size());
      for (const auto& t : n.tokens) s.push_back(normalize_token(t));
      corpus.push_back(std::move(s));
    }
  return corpus;
}

class Vocabulary {
 public:
  Vocabulary() { add(std::string(kOovToken)); }

  /// Builds a vocabulary with OOV at index 0 followed by the corpus tokens in lexicographic order.
  static Vocabulary from_tokens(std::vector<std::string> tokens) {
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    Vocabulary v;
    for (auto& t : tokens)
      if (t != kOovToken) v.add(std::move(t));
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t oov() const { return 0; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::size_t index_of(const std::string& t) const {
    auto it = index_.find(t);
    return it == index_.end() ? oov() : it->second;
  }

  bool contains(const std::string& t) const { return index_.count(t) > 0; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(std::string t) {
    index_.emplace(t, tokens_.size());
    tokens_.push_back(std::move(t));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// |V| x d table; row i is the vector of vocabulary token i.
using EmbeddingTable = RowMatrix;

struct SkipgramConfig {
  int dim = 256;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

struct SkipgramResult {
  Vocabulary vocab;
  EmbeddingTable table;
  std::vector<double> epoch_loss;  // mean negative log-likelihood per (center, context) pair
};

inline SkipgramResult train_skipgram(const std::vector<Sentence>& corpus, const SkipgramConfig& cfg) {
  if (cfg.dim <= 0 || cfg.window <= 0 || cfg.negatives <= 0 || cfg.epochs < 0 || cfg.learning_rate <= 0)
    throw ConfigError("skip-gram settings must be positive");
  std::vector<std::string> all;
  for (const auto& s : corpus) all.insert(all.end(), s.begin(), s.end());
  if (all.empty()) throw EmptyCorpus("skip-gram corpus has no tokens");

  SkipgramResult r{Vocabulary::from_tokens(all), {}, {}};
  const auto V = static_cast<Eigen::Index>(r.vocab.size());
  const int d = cfg.dim;

  std::vector<std::vector<std::size_t>> ids;
  std::vector<double> counts(r.vocab.size(), 0.0);
  for (const auto& s : corpus) {
    std::vector<std::size_t> row;
    for (const auto& t : s) {
      row.push_back(r.vocab.index_of(t));
      counts[row.back()] += 1.0;
    }
    ids.push_back(std::move(row));
  }

  // Negative-sampling distribution: unigram^0.75 as a cumulative table.
  std::vector<double> cdf(r.vocab.size());
  double acc = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    acc += std::pow(counts[i], 0.75);
    cdf[i] = acc;
  }
  for (auto& c : cdf) c /= acc;

  Rng rng(cfg.seed);
  RowMatrix in(V, d), out = RowMatrix::Zero(V, d);
  for (Eigen::Index i = 0; i < V; ++i)
    for (int j = 0; j < d; ++j) in(i, j) = rng.uniform(-0.5, 0.5) / d;

  std::size_t total_positions = 0;
  for (const auto& s : ids) total_positions += s.size();
  const double total_steps = static_cast<double>(std::max<std::size_t>(1, total_positions * cfg.epochs));
  double step = 0;
  Eigen::VectorXd grad_center(d);

  auto sample_negative = [&]() {
    const double u = rng.uniform();
    return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0;
    std::size_t pairs = 0;
    for (const auto& s : ids) {
      const int n = static_cast<int>(s.size());
      for (int i = 0; i < n; ++i, step += 1) {
        const double lr = std::max(cfg.learning_rate * 1e-4, cfg.learning_rate * (1.0 - step / total_steps));
        const int reach = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.window)));
        for (int j = std::max(0, i - reach); j <= std::min(n - 1, i + reach); ++j) {
          if (j == i) continue;
          auto center = in.row(static_cast<Eigen::Index>(s[i]));
          grad_center.setZero();
          for (int k = 0; k <= cfg.negatives; ++k) {
            std::size_t target;
            double label;
            if (k == 0) {
              target = s[j];
              label = 1.0;
            } else {
              target = std::min(sample_negative(), r.vocab.size() - 1);
              if (target == s[j]) continue;
              label = 0.0;
            }
            auto ctx = out.row(static_cast<Eigen::Index>(target));
            const double score = center.dot(ctx);
            const double p = sigmoid(score);
            loss -= label > 0 ? std::log(std::max(p, 1e-12)) : std::log(std::max(1.0 - p, 1e-12));
            const double g = lr * (label - p);
            grad_center += g * ctx.transpose();
            ctx += g * center;
          }
          center += grad_center.transpose();
          ++pairs;
        }
      }
    }
    r.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  in.row(0).setZero();  // OOV never occurs in training; it embeds as the zero vector
  r.table = std::move(in);
  return r;
}

/// Mean of the node's normalized token vectors; the zero vector for token-less nodes.
inline Vector embed_node(const CpgNode& node, const Vocabulary& vocab, const EmbeddingTable& table) {
  Vector v = Vector::Zero(table.cols());
  if (node.tokens.empty()) return v;
  for (const auto& t : node.tokens) v += table.row(static_cast<Eigen::Index>(vocab.index_of(normalize_token(t)))).transpose();
  return v / static_cast<double>(node.tokens.size());
}

/// Node feature matrix H^0 (n x d) in the graph's node order.
inline Matrix embed_nodes(const Cpg& g, const Vocabulary& vocab, const EmbeddingTable& table) {
  Matrix h(static_cast<Eigen::Index>(g.nodes.size()), table.cols());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = embed_node(g.nodes[i], vocab, table).transpose();
  return h;
}

}  // namespace ifmavd
