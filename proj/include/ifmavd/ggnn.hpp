#pragma once

// Gated graph network over CPG node features, mean-pooled per step and
// projected to a single d-dimensional function vector.

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>

#include "ifmavd/cpg.hpp"
#include "ifmavd/errors.hpp"
#include "ifmavd/linalg.hpp"
#include "ifmavd/logistic.hpp"
#include "ifmavd/metrics.hpp"
#include "ifmavd/optim.hpp"
#include "ifmavd/rng.hpp"
#include "ifmavd/slicer.hpp"
#include "ifmavd/split.hpp"
#include "ifmavd/token_embed.hpp"

namespace ifmavd {

using SparseAdj = Eigen::SparseMatrix<double>;

struct GgnnParams {
  int dim = 0;
  int steps = 0;
  Matrix wz, wr, wh, uz, ur, uh;  // d x d
  Vector bz, br, bh;              // d
  Matrix proj;                    // (steps*d) x d
  Vector proj_bias;               // d

  static GgnnParams zeros(int d, int t) {
    if (d <= 0 || t < 1) throw ConfigError("GGNN needs d >= 1 and at least one propagation step");
    GgnnParams p;
    p.dim = d;
    p.steps = t;
    for (Matrix* m : {&p.wz, &p.wr, &p.wh, &p.uz, &p.ur, &p.uh}) *m = Matrix::Zero(d, d);
    for (Vector* v : {&p.bz, &p.br, &p.bh, &p.proj_bias}) *v = Vector::Zero(d);
    p.proj = Matrix::Zero(static_cast<Eigen::Index>(t) * d, d);
    return p;
  }

  /// Glorot weights, zero biases.
  static GgnnParams init(int d, int t, Rng& rng) {
    GgnnParams p = zeros(d, t);
    for (Matrix* m : {&p.wz, &p.wr, &p.wh, &p.uz, &p.ur, &p.uh}) *m = glorot(rng, d, d);
    p.proj = glorot(rng, static_cast<Eigen::Index>(t) * d, d);
    return p;
  }

  ParamSpans spans() {
    ParamSpans s;
    for (Matrix* m : {&wz, &wr, &wh, &uz, &ur, &uh}) s.emplace_back(m->data(), static_cast<std::size_t>(m->size()));
    for (Vector* v : {&bz, &br, &bh}) s.emplace_back(v->data(), static_cast<std::size_t>(v->size()));
    s.emplace_back(proj.data(), static_cast<std::size_t>(proj.size()));
    s.emplace_back(proj_bias.data(), static_cast<std::size_t>(proj_bias.size()));
    return s;
  }

  double squared_norm() const {
    return wz.squaredNorm() + wr.squaredNorm() + wh.squaredNorm() + uz.squaredNorm() + ur.squaredNorm() +
           uh.squaredNorm() + bz.squaredNorm() + br.squaredNorm() + bh.squaredNorm() + proj.squaredNorm() +
           proj_bias.squaredNorm();
  }

  /// this += s * other, tensor by tensor.
  void add_scaled(const GgnnParams& o, double s) {
    wz += s * o.wz; wr += s * o.wr; wh += s * o.wh;
    uz += s * o.uz; ur += s * o.ur; uh += s * o.uh;
    bz += s * o.bz; br += s * o.br; bh += s * o.bh;
    proj += s * o.proj;
    proj_bias += s * o.proj_bias;
  }

  bool all_finite() const {
    return wz.allFinite() && wr.allFinite() && wh.allFinite() && uz.allFinite() && ur.allFinite() && uh.allFinite() &&
           bz.allFinite() && br.allFinite() && bh.allFinite() && proj.allFinite() && proj_bias.allFinite();
  }

  friend bool operator==(const GgnnParams& a, const GgnnParams& b) {
    return a.dim == b.dim && a.steps == b.steps && a.wz == b.wz && a.wr == b.wr && a.wh == b.wh && a.uz == b.uz &&
           a.ur == b.ur && a.uh == b.uh && a.bz == b.bz && a.br == b.br && a.bh == b.bh && a.proj == b.proj &&
           a.proj_bias == b.proj_bias;
  }
};

namespace detail {

inline SparseAdj adjacency_from(const std::vector<NodeId>& ids, const std::vector<CpgEdge>& edges) {
  std::unordered_map<NodeId, Eigen::Index> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], static_cast<Eigen::Index>(i));
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& e : edges) {
    auto s = pos.find(e.src), d = pos.find(e.dst);
    if (s == pos.end()) throw DanglingEdge(e.src);
    if (d == pos.end()) throw DanglingEdge(e.dst);
    if (s->second == d->second) continue;
    trips.emplace_back(s->second, d->second, 1.0);
    trips.emplace_back(d->second, s->second, 1.0);
  }
  const auto n = static_cast<Eigen::Index>(ids.size());
  SparseAdj a(n, n);
  a.setFromTriplets(trips.begin(), trips.end(), [](double, double) { return 1.0; });
  return a;
}

}  // namespace detail

/// Binary symmetric adjacency over all edge kinds, zero diagonal, rows in node order.
inline SparseAdj adjacency(const Cpg& cpg) {
  std::vector<NodeId> ids;
  ids.reserve(cpg.nodes.size());
  for (const auto& n : cpg.nodes) ids.push_back(n.node_id);
  return detail::adjacency_from(ids, cpg.edges);
}

namespace detail {

// M = A H with every coordinate summed in sorted order (independent of neighbor numbering).
inline Matrix aggregate(const SparseAdj& a, const Matrix& h) {
  const Eigen::SparseMatrix<double, Eigen::RowMajor> ar = a;
  Matrix m = Matrix::Zero(h.rows(), h.cols());
  std::vector<double> buf;
  for (Eigen::Index i = 0; i < ar.outerSize(); ++i) {
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      buf.clear();
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(ar, i); it; ++it)
        buf.push_back(it.value() * h(it.col(), c));
      m(i, c) = sorted_sum(buf);
    }
  }
  return m;
}

inline Vector column_means(const Matrix& h) {
  Vector g(h.cols());
  std::vector<double> buf(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    for (Eigen::Index i = 0; i < h.rows(); ++i) buf[static_cast<std::size_t>(i)] = h(i, c);
    g(c) = sorted_sum(buf) / static_cast<double>(h.rows());
  }
  return g;
}

}  // namespace detail

struct StepCache {
  Matrix h, m, z, r, hhat;
};

/// OrderFixed sums every output coordinate in an order that does not depend on node
/// numbering, so features are exactly permutation invariant. Blas uses ordinary Eigen
/// products, which agree to rounding error and are several times faster; training uses it.
enum class Kernel { OrderFixed, Blas };

/// One GRU propagation step: H' = (1-Z)*H + Z*Hhat with messages M = A H.
inline Matrix propagate(const Matrix& h, const SparseAdj& a, const GgnnParams& p, StepCache* cache = nullptr,
                        Kernel kernel = Kernel::OrderFixed) {
  if (h.cols() != p.dim || a.rows() != h.rows() || a.cols() != h.rows())
    throw ShapeMismatch("propagate: H is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) + ", A is " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ", d=" + std::to_string(p.dim));
  const auto sig = [](double v) { return sigmoid(v); };
  const Eigen::Index d = p.dim;
  Matrix m, z, r, hhat;
  if (kernel == Kernel::OrderFixed) {
    using detail::rowwise_product;
    m = detail::aggregate(a, h);
    z = ((rowwise_product(m, p.wz) + rowwise_product(h, p.uz)).rowwise() + p.bz.transpose()).unaryExpr(sig);
    r = ((rowwise_product(m, p.wr) + rowwise_product(h, p.ur)).rowwise() + p.br.transpose()).unaryExpr(sig);
    hhat = ((rowwise_product(m, p.wh) + rowwise_product(r.cwiseProduct(h), p.uh)).rowwise() + p.bh.transpose())
               .array()
               .tanh()
               .matrix();
  } else {
    // Gate products fused into two wide GEMMs.
    m = a * h;
    Matrix w(d, 3 * d), u(d, 2 * d);
    w << p.wz, p.wr, p.wh;
    u << p.uz, p.ur;
    const Matrix mw = m * w;
    const Matrix hu = h * u;
    z = ((mw.leftCols(d) + hu.leftCols(d)).rowwise() + p.bz.transpose()).unaryExpr(sig);
    r = ((mw.middleCols(d, d) + hu.rightCols(d)).rowwise() + p.br.transpose()).unaryExpr(sig);
    hhat = ((mw.rightCols(d) + r.cwiseProduct(h) * p.uh).rowwise() + p.bh.transpose()).array().tanh().matrix();
  }
  Matrix out = (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(hhat);
  if (cache) *cache = {h, std::move(m), std::move(z), std::move(r), std::move(hhat)};
  return out;
}

/// Backward through one step. Accumulates parameter gradients into `g`, returns dL/dH.
inline Matrix propagate_backward(const StepCache& c, const SparseAdj& a, const GgnnParams& p, const Matrix& dout,
                                 GgnnParams& g) {
  const auto& h = c.h;
  const auto& z = c.z;
  const auto& r = c.r;
  const Eigen::Index d = p.dim, n = h.rows();
  Matrix dh = dout.cwiseProduct((1.0 - z.array()).matrix());

  // Pre-activation gradients of the update, reset and candidate gates, side by side.
  Matrix da(n, 3 * d);
  da.leftCols(d) = dout.cwiseProduct(c.hhat - h).cwiseProduct(z).cwiseProduct((1.0 - z.array()).matrix());
  da.rightCols(d) = dout.cwiseProduct(z).cwiseProduct((1.0 - c.hhat.array().square()).matrix());
  const Matrix rh = r.cwiseProduct(h);
  const Matrix drh = da.rightCols(d) * p.uh.transpose();
  dh += drh.cwiseProduct(r);
  da.middleCols(d, d) = drh.cwiseProduct(h).cwiseProduct(r).cwiseProduct((1.0 - r.array()).matrix());

  Matrix w(d, 3 * d), u(d, 2 * d);
  w << p.wz, p.wr, p.wh;
  u << p.uz, p.ur;
  const Matrix gw = c.m.transpose() * da;
  const Matrix gu = h.transpose() * da.leftCols(2 * d);
  g.wz += gw.leftCols(d);
  g.wr += gw.middleCols(d, d);
  g.wh += gw.rightCols(d);
  g.uz += gu.leftCols(d);
  g.ur += gu.rightCols(d);
  g.uh += rh.transpose() * da.rightCols(d);
  const Vector gb = da.colwise().sum().transpose();
  g.bz += gb.head(d);
  g.br += gb.segment(d, d);
  g.bh += gb.tail(d);
  const Matrix dm = da * w.transpose();
  dh += da.leftCols(2 * d) * u.transpose();

  dh += a.transpose() * dm;
  return dh;
}

/// Encoder input for one graph: initial node features and adjacency.
struct GraphInput {
  Matrix h0;
  SparseAdj adj;
};

struct EncodeTrace {
  std::vector<StepCache> steps;
  Vector pooled;  // concatenated step means, length steps*d
};

/// Runs T steps, mean-pools the rows after each step, concatenates and projects.
inline Vector encode_graph(const GraphInput& in, const GgnnParams& p, EncodeTrace* trace = nullptr,
                           Kernel kernel = Kernel::OrderFixed) {
  if (in.h0.rows() == 0) throw EmptyGraph("cannot encode a graph with no nodes");
  const Eigen::Index d = p.dim;
  Vector pooled(static_cast<Eigen::Index>(p.steps) * d);
  if (trace) trace->steps.assign(static_cast<std::size_t>(p.steps), {});
  Matrix h = in.h0;
  for (int t = 0; t < p.steps; ++t) {
    h = propagate(h, in.adj, p, trace ? &trace->steps[static_cast<std::size_t>(t)] : nullptr, kernel);
    pooled.segment(t * d, d) = kernel == Kernel::OrderFixed ? detail::column_means(h) : Vector(h.colwise().mean().transpose());
  }
  if (trace) trace->pooled = pooled;
  return p.proj.transpose() * pooled + p.proj_bias;
}

/// Backward through encode_graph given dL/dx; accumulates into `g`.
inline void encode_backward(const EncodeTrace& tr, const GraphInput& in, const GgnnParams& p, const Vector& dx,
                            GgnnParams& g) {
  const Eigen::Index d = p.dim;
  const auto n = in.h0.rows();
  g.proj += tr.pooled * dx.transpose();
  g.proj_bias += dx;
  const Vector dpooled = p.proj * dx;
  Matrix dh = Matrix::Zero(n, d);
  for (int t = p.steps - 1; t >= 0; --t) {
    dh.rowwise() += dpooled.segment(t * d, d).transpose() / static_cast<double>(n);
    dh = propagate_backward(tr.steps[static_cast<std::size_t>(t)], in.adj, p, dh, g);
  }
}

inline GraphInput function_input(const Cpg& cpg, const Vocabulary& vocab, const EmbeddingTable& table) {
  if (cpg.nodes.empty()) throw EmptyGraph("function '" + cpg.function_id + "' has no nodes");
  return {embed_nodes(cpg, vocab, table), adjacency(cpg)};
}

/// Induced graph of a behavior slice: its nodes (ascending id) and its PDG edges.
inline GraphInput behavior_input(const BehaviorSubgraph& sub, const Cpg& cpg, const Vocabulary& vocab,
                                 const EmbeddingTable& table) {
  if (sub.node_ids.empty()) throw EmptyGraph("behavior subgraph has no nodes");
  GraphInput in;
  in.h0.resize(static_cast<Eigen::Index>(sub.node_ids.size()), table.cols());
  for (std::size_t i = 0; i < sub.node_ids.size(); ++i)
    in.h0.row(static_cast<Eigen::Index>(i)) = embed_node(cpg.node(sub.node_ids[i]), vocab, table).transpose();
  in.adj = detail::adjacency_from(sub.node_ids, sub.edges);
  return in;
}

inline Vector encode_function(const Cpg& cpg, const Vocabulary& vocab, const EmbeddingTable& table,
                              const GgnnParams& p) {
  return encode_graph(function_input(cpg, vocab, table), p);
}

inline Vector encode_behavior(const BehaviorSubgraph& sub, const Cpg& cpg, const Vocabulary& vocab,
                              const EmbeddingTable& table, const GgnnParams& p) {
  return encode_graph(behavior_input(sub, cpg, vocab, table), p);
}

/// Stacks one encoded row per input.
inline Matrix encode_all(const std::vector<GraphInput>& inputs, const GgnnParams& p) {
  Matrix x(static_cast<Eigen::Index>(inputs.size()), p.dim);
  for (std::size_t i = 0; i < inputs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = encode_graph(inputs[i], p).transpose();
  return x;
}

/// Mean BCE of the logistic head over `batch` plus wd * squared norm of every parameter.
/// Gradients are written (not accumulated) when the output pointers are set.
inline double intra_loss(const std::vector<GraphInput>& graphs, const std::vector<int>& labels,
                         const std::vector<std::size_t>& batch, const GgnnParams& p, const LogisticHead& head,
                         double weight_decay, GgnnParams* grad = nullptr, LogisticHead* head_grad = nullptr) {
  const bool want = grad != nullptr && head_grad != nullptr;
  if (want) {
    *grad = GgnnParams::zeros(p.dim, p.steps);
    *head_grad = LogisticHead::zeros(p.dim);
  }
  double loss = 0;
  const double inv = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  EncodeTrace tr;
  for (std::size_t i : batch) {
    const Vector x = encode_graph(graphs[i], p, want ? &tr : nullptr, Kernel::Blas);
    const double z = head.logit(x);
    const double y = labels[i] != 0 ? 1.0 : 0.0;
    loss += inv * bce_from_logit(z, y);
    if (want) {
      const double dz = inv * (sigmoid(z) - y);
      head_grad->w += dz * x;
      head_grad->b += dz;
      encode_backward(tr, graphs[i], p, dz * head.w, *grad);
    }
  }
  loss += weight_decay * (p.squared_norm() + head.squared_norm());
  if (want) {
    grad->add_scaled(p, 2.0 * weight_decay);
    head_grad->w += 2.0 * weight_decay * head.w;
    head_grad->b += 2.0 * weight_decay * head.b;
  }
  return loss;
}

struct IntraConfig {
  int steps = 3;
  TrainConfig train;
};

struct IntraModel {
  GgnnParams params;
  LogisticHead head;
  std::vector<double> train_loss;  // per epoch: batch losses before each update, weighted by batch size
  int best_epoch = 0;              // 0 is the initialization
  double best_val_f = 0;
};

namespace detail {

inline std::pair<double, double> intra_val_score(const std::vector<GraphInput>& graphs, const std::vector<int>& labels,
                                                 const std::vector<std::size_t>& idx, const GgnnParams& p,
                                                 const LogisticHead& head) {
  std::vector<int> pred, y;
  double loss = 0;
  for (std::size_t i : idx) {
    const double z = head.logit(encode_graph(graphs[i], p, nullptr, Kernel::Blas));
    pred.push_back(z >= 0 ? 1 : 0);
    y.push_back(labels[i] != 0 ? 1 : 0);
    loss += bce_from_logit(z, y.back());
  }
  return {evaluate(pred, y).f_measure, loss};
}

}  // namespace detail

/// Trains encoder and head on the train split with Adam, keeping the parameters
/// with the best validation F-measure (ties go to lower validation loss).
inline IntraModel train_intra(const std::vector<GraphInput>& graphs, const std::vector<int>& labels,
                              const SplitMask& split, const IntraConfig& cfg) {
  cfg.train.validate();
  if (graphs.size() != labels.size() || graphs.size() != split.size())
    throw LengthMismatch("graphs, labels and split must have equal length");
  const auto train_idx = indices_of(split, Split::Train);
  const auto val_idx = indices_of(split, Split::Val);
  bool pos = false, neg = false;
  for (std::size_t i : train_idx) (labels[i] != 0 ? pos : neg) = true;
  if (!pos || !neg) throw DegenerateLabels("train split must contain both labels");
  const int d = static_cast<int>(graphs[train_idx.front()].h0.cols());

  Rng rng(cfg.train.seed);
  IntraModel model;
  model.params = GgnnParams::init(d, cfg.steps, rng);
  model.head = {glorot(rng, d, 1).col(0), 0.0};

  GgnnParams cur = model.params, grad;
  LogisticHead cur_head = model.head, head_grad;
  auto ps = cur.spans();
  auto hs = cur_head.spans();
  ParamSpans all = ps;
  all.insert(all.end(), hs.begin(), hs.end());
  Adam adam(total_size(all), cfg.train.beta1());

  double best_f = -1, best_loss = std::numeric_limits<double>::infinity();
  if (!val_idx.empty()) std::tie(best_f, best_loss) = detail::intra_val_score(graphs, labels, val_idx, cur, cur_head);
  model.best_val_f = std::max(best_f, 0.0);

  std::vector<std::size_t> order = train_idx;
  const std::size_t bs = cfg.train.batch_size > 0 ? static_cast<std::size_t>(cfg.train.batch_size) : order.size();
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    rng.shuffle(order);
    const double lr = cfg.train.lr_at(epoch);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
      epoch_loss += static_cast<double>(batch.size()) *
                    intra_loss(graphs, labels, batch, cur, cur_head, cfg.train.weight_decay, &grad, &head_grad);
      ParamSpans g = grad.spans();
      auto hg = head_grad.spans();
      g.insert(g.end(), hg.begin(), hg.end());
      adam.step(all, g, lr);
    }
    model.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    if (val_idx.empty()) {
      model.params = cur;
      model.head = cur_head;
      model.best_epoch = epoch + 1;
      continue;
    }
    const auto [f, l] = detail::intra_val_score(graphs, labels, val_idx, cur, cur_head);
    if (f > best_f || (f == best_f && l < best_loss)) {
      best_f = f;
      best_loss = l;
      model.params = cur;
      model.head = cur_head;
      model.best_epoch = epoch + 1;
      model.best_val_f = f;
    }
  }
  return model;
}

/// Convenience overload building graph inputs from CPGs.
inline IntraModel train_intra(const std::vector<Cpg>& corpus, const std::vector<int>& labels, const SplitMask& split,
                              const Vocabulary& vocab, const EmbeddingTable& table, const IntraConfig& cfg) {
  std::vector<GraphInput> graphs;
  graphs.reserve(corpus.size());
  for (const auto& g : corpus) graphs.push_back(function_input(g, vocab, table));
  return train_intra(graphs, labels, split, cfg);
}

}  // namespace ifmavd
