#pragma once

// Stacked hyperedge convolutions with a logistic head, trained transductively:
// every function propagates, only masked rows contribute to the loss.

#include <limits>
#include <vector>

#include "ifmavd/errors.hpp"
#include "ifmavd/hypergraph.hpp"
#include "ifmavd/linalg.hpp"
#include "ifmavd/logistic.hpp"
#include "ifmavd/metrics.hpp"
#include "ifmavd/optim.hpp"
#include "ifmavd/rng.hpp"
#include "ifmavd/split.hpp"

namespace ifmavd {

struct HgnnParams {
  std::vector<Matrix> beta;  // one d x d filter per layer
  Vector w;
  double b = 0;

  static HgnnParams init(int d, int layers, Rng& rng) {
    if (d <= 0 || layers < 1) throw ConfigError("detector needs d >= 1 and at least one layer");
    HgnnParams p;
    for (int l = 0; l < layers; ++l) p.beta.push_back(glorot(rng, d, d));
    p.w = glorot(rng, d, 1).col(0);
    return p;
  }

  static HgnnParams zeros_like(const HgnnParams& o) {
    HgnnParams p;
    for (const auto& m : o.beta) p.beta.push_back(Matrix::Zero(m.rows(), m.cols()));
    p.w = Vector::Zero(o.w.size());
    return p;
  }

  int layers() const { return static_cast<int>(beta.size()); }

  ParamSpans spans() {
    ParamSpans s;
    for (auto& m : beta) s.emplace_back(m.data(), static_cast<std::size_t>(m.size()));
    s.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
    s.emplace_back(&b, 1);
    return s;
  }

  double squared_norm() const {
    double s = w.squaredNorm() + b * b;
    for (const auto& m : beta) s += m.squaredNorm();
    return s;
  }

  bool all_finite() const {
    for (const auto& m : beta)
      if (!m.allFinite()) return false;
    return w.allFinite() && std::isfinite(b);
  }

  friend bool operator==(const HgnnParams& a, const HgnnParams& b) {
    return a.beta == b.beta && a.w == b.w && a.b == b.b;
  }
};

struct HgnnTrace {
  std::vector<Matrix> propagated;  // theta * Z_{l-1}
  std::vector<Matrix> pre;         // propagated * beta_l
  Matrix last;                     // Z_L
};

/// Logits of every function: Z_l = ReLU(theta Z_{l-1} beta_l) for l < L, Z_L without activation.
inline Vector forward_logits(const Matrix& x, const ThetaOperator& theta, const HgnnParams& p, HgnnTrace* trace = nullptr) {
  if (x.rows() != theta.size())
    throw ShapeMismatch("feature rows " + std::to_string(x.rows()) + " vs hypergraph vertices " + std::to_string(theta.size()));
  if (p.beta.empty()) throw ConfigError("detector has no layers");
  Matrix z = x;
  if (trace) *trace = {};
  for (int l = 0; l < p.layers(); ++l) {
    const Matrix& beta = p.beta[static_cast<std::size_t>(l)];
    if (z.cols() != beta.rows()) throw ShapeMismatch("layer " + std::to_string(l) + " input width differs from filter");
    Matrix a = theta.apply(z);
    Matrix pre = detail::rowwise_product(a, beta);
    z = l + 1 < p.layers() ? Matrix(pre.cwiseMax(0.0)) : pre;
    if (trace) {
      trace->propagated.push_back(std::move(a));
      trace->pre.push_back(std::move(pre));
    }
  }
  if (z.cols() != p.w.size()) throw ShapeMismatch("head width differs from last layer");
  Vector logits = detail::rowwise_product(z, p.w).col(0).array() + p.b;
  if (trace) trace->last = std::move(z);
  return logits;
}

/// Vulnerability probability of every function.
inline Vector forward(const Matrix& x, const ThetaOperator& theta, const HgnnParams& p) {
  return forward_logits(x, theta, p).unaryExpr([](double v) { return sigmoid(v); });
}

inline Vector forward(const Matrix& x, const Hypergraph& hg, const HgnnParams& p) {
  return forward(x, ThetaOperator(hg), p);
}

/// Mean BCE over the masked rows of `prob`, with probabilities clamped away from 0 and 1,
/// plus weight_decay * ||params||^2.
inline double loss(const Vector& prob, const std::vector<int>& labels, const std::vector<std::size_t>& mask,
                   const HgnnParams& params, double weight_decay) {
  if (mask.empty()) throw EmptyMask("loss mask selects no functions");
  if (static_cast<std::size_t>(prob.size()) != labels.size()) throw LengthMismatch("probabilities and labels differ in length");
  double s = 0;
  for (std::size_t i : mask) {
    const double p = std::clamp(prob(static_cast<Eigen::Index>(i)), 1e-12, 1.0 - 1e-12);
    s -= labels[i] != 0 ? std::log(p) : std::log(1.0 - p);
  }
  return s / static_cast<double>(mask.size()) + weight_decay * params.squared_norm();
}

/// Same objective computed from logits (stable), with the gradient written to `grad` when set.
inline double loss_and_gradient(const Matrix& x, const ThetaOperator& theta, const std::vector<int>& labels,
                                const std::vector<std::size_t>& mask, const HgnnParams& p, double weight_decay,
                                HgnnParams* grad = nullptr) {
  if (mask.empty()) throw EmptyMask("loss mask selects no functions");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw LengthMismatch("features and labels differ in length");
  HgnnTrace tr;
  const Vector logits = forward_logits(x, theta, p, grad ? &tr : nullptr);
  const double inv = 1.0 / static_cast<double>(mask.size());
  double data = 0;
  Vector dlogit = Vector::Zero(logits.size());
  for (std::size_t i : mask) {
    const auto k = static_cast<Eigen::Index>(i);
    const double y = labels[i] != 0 ? 1.0 : 0.0;
    data += bce_from_logit(logits(k), y);
    dlogit(k) = inv * (sigmoid(logits(k)) - y);
  }
  const double total = inv * data + weight_decay * p.squared_norm();
  if (!grad) return total;

  *grad = HgnnParams::zeros_like(p);
  grad->w = tr.last.transpose() * dlogit + 2.0 * weight_decay * p.w;
  grad->b = dlogit.sum() + 2.0 * weight_decay * p.b;
  Matrix dz = dlogit * p.w.transpose();
  for (int l = p.layers() - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    Matrix dpre = dz;
    if (l + 1 < p.layers()) dpre = dpre.cwiseProduct((tr.pre[ul].array() > 0.0).cast<double>().matrix());
    grad->beta[ul] = tr.propagated[ul].transpose() * dpre + 2.0 * weight_decay * p.beta[ul];
    if (l > 0) dz = theta.apply(dpre * p.beta[ul].transpose());  // theta is symmetric
  }
  return total;
}

struct HgnnModel {
  HgnnParams params;
  std::vector<double> train_loss;  // per epoch, after the update
  int best_epoch = 0;              // 0 is the initialization
  double initial_val_f = 0;
  double best_val_f = 0;
};

/// Full-batch Adam on the train rows; returns the parameters with the best validation
/// F-measure (ties go to lower validation loss).
inline HgnnModel train_detector(const Matrix& x, const ThetaOperator& theta, const std::vector<int>& labels,
                                const SplitMask& split, const TrainConfig& cfg, int layers = 2, double threshold = 0.5) {
  cfg.validate();
  if (static_cast<std::size_t>(x.rows()) != labels.size() || labels.size() != split.size())
    throw LengthMismatch("features, labels and split must have equal length");
  const auto train_idx = indices_of(split, Split::Train);
  const auto val_idx = indices_of(split, Split::Val);
  if (!has_both_labels(labels, train_idx)) throw DegenerateLabels("train split must contain both labels");

  Rng rng(cfg.seed);
  HgnnModel m;
  m.params = HgnnParams::init(static_cast<int>(x.cols()), layers, rng);
  HgnnParams cur = m.params, grad;
  auto ps = cur.spans();
  Adam adam(total_size(ps), cfg.beta1());

  auto score = [&](const HgnnParams& p) {
    const Vector logits = forward_logits(x, theta, p);
    std::vector<int> pred, y;
    double l = 0;
    for (std::size_t i : val_idx) {
      const double z = logits(static_cast<Eigen::Index>(i));
      pred.push_back(sigmoid(z) >= threshold ? 1 : 0);
      y.push_back(labels[i] != 0 ? 1 : 0);
      l += bce_from_logit(z, y.back());
    }
    return std::pair{evaluate(pred, y).f_measure, l};
  };
  double best_f = -1, best_loss = std::numeric_limits<double>::infinity();
  if (!val_idx.empty()) std::tie(best_f, best_loss) = score(cur);
  m.initial_val_f = m.best_val_f = std::max(best_f, 0.0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    loss_and_gradient(x, theta, labels, train_idx, cur, cfg.weight_decay, &grad);
    adam.step(ps, grad.spans(), cfg.lr_at(epoch));
    m.train_loss.push_back(loss_and_gradient(x, theta, labels, train_idx, cur, cfg.weight_decay));
    if (val_idx.empty()) {
      m.params = cur;
      m.best_epoch = epoch + 1;
      continue;
    }
    const auto [f, l] = score(cur);
    if (f > best_f || (f == best_f && l < best_loss)) {
      best_f = f;
      best_loss = l;
      m.params = cur;
      m.best_epoch = epoch + 1;
      m.best_val_f = f;
    }
  }
  return m;
}

inline HgnnModel train_detector(const Matrix& x, const Hypergraph& hg, const std::vector<int>& labels,
                                const SplitMask& split, const TrainConfig& cfg, int layers = 2, double threshold = 0.5) {
  return train_detector(x, ThetaOperator(hg), labels, split, cfg, layers, threshold);
}

/// Metrics of thresholded probabilities restricted to the rows in `idx`.
inline Metrics evaluate_rows(const Vector& prob, const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                             double threshold = 0.5) {
  std::vector<int> pred, y;
  for (std::size_t i : idx) {
    pred.push_back(prob(static_cast<Eigen::Index>(i)) >= threshold ? 1 : 0);
    y.push_back(labels.at(i) != 0 ? 1 : 0);
  }
  return evaluate(pred, y);
}

}  // namespace ifmavd
