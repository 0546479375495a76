#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ifmavd/errors.hpp"
#include "ifmavd/linalg.hpp"
#include "ifmavd/metrics.hpp"
#include "ifmavd/optim.hpp"
#include "ifmavd/rng.hpp"
#include "ifmavd/split.hpp"

namespace ifmavd {

/// Logistic classifier on a d-vector: p = sigmoid(w.x + b).
struct LogisticHead {
  Vector w;
  double b = 0;

  static LogisticHead zeros(int d) { return {Vector::Zero(d), 0.0}; }

  ParamSpans spans() { return {{w.data(), static_cast<std::size_t>(w.size())}, {&b, 1}}; }
  double squared_norm() const { return w.squaredNorm() + b * b; }
  double logit(const Vector& x) const { return w.dot(x) + b; }
  double probability(const Vector& x) const { return sigmoid(logit(x)); }
  friend bool operator==(const LogisticHead&, const LogisticHead&) = default;
};

/// Stable binary cross-entropy from a logit.
inline double bce_from_logit(double z, double y) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
}

/// 1 where probability >= threshold.
inline std::vector<int> threshold_predictions(const Vector& prob, double threshold) {
  std::vector<int> out(static_cast<std::size_t>(prob.size()));
  for (Eigen::Index i = 0; i < prob.size(); ++i) out[static_cast<std::size_t>(i)] = prob(i) >= threshold ? 1 : 0;
  return out;
}

inline bool has_both_labels(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  bool pos = false, neg = false;
  for (std::size_t i : idx) (labels.at(i) != 0 ? pos : neg) = true;
  return pos && neg;
}

/// Mean BCE over rows `idx` of `x` plus wd * (||w||^2 + b^2); writes the gradient when asked.
inline double logistic_loss(const Matrix& x, const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                            const LogisticHead& head, double weight_decay, LogisticHead* grad = nullptr) {
  if (idx.empty()) throw EmptyMask("loss mask selects no rows");
  if (grad) *grad = LogisticHead::zeros(static_cast<int>(x.cols()));
  const double inv = 1.0 / static_cast<double>(idx.size());
  double loss = 0;
  for (std::size_t i : idx) {
    const Vector xi = x.row(static_cast<Eigen::Index>(i)).transpose();
    const double z = head.logit(xi);
    const double y = labels[i] != 0 ? 1.0 : 0.0;
    loss += inv * bce_from_logit(z, y);
    if (grad) {
      const double dz = inv * (sigmoid(z) - y);
      grad->w += dz * xi;
      grad->b += dz;
    }
  }
  loss += weight_decay * head.squared_norm();
  if (grad) {
    grad->w += 2.0 * weight_decay * head.w;
    grad->b += 2.0 * weight_decay * head.b;
  }
  return loss;
}

struct LogisticModel {
  LogisticHead head;
  std::vector<double> train_loss;
  int best_epoch = 0;
  double best_val_f = 0;
};

inline Vector logistic_probabilities(const Matrix& x, const LogisticHead& head) {
  Vector p(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) p(i) = head.probability(x.row(i).transpose());
  return p;
}

/// Full-batch logistic regression on feature rows with the same optimizer and
/// best-validation selection as the hypergraph detector.
inline LogisticModel train_logistic(const Matrix& x, const std::vector<int>& labels, const SplitMask& split,
                                    const TrainConfig& cfg, double threshold = 0.5) {
  cfg.validate();
  if (static_cast<std::size_t>(x.rows()) != labels.size() || labels.size() != split.size())
    throw LengthMismatch("features, labels and split must have equal length");
  const auto train_idx = indices_of(split, Split::Train);
  const auto val_idx = indices_of(split, Split::Val);
  if (!has_both_labels(labels, train_idx)) throw DegenerateLabels("train split must contain both labels");

  Rng rng(cfg.seed);
  LogisticModel m;
  m.head = {glorot(rng, x.cols(), 1).col(0), 0.0};
  LogisticHead cur = m.head, grad;
  auto ps = cur.spans();
  Adam adam(total_size(ps), cfg.beta1());

  auto score = [&](const LogisticHead& h) {
    std::vector<int> pred, y;
    double loss = 0;
    for (std::size_t i : val_idx) {
      const double z = h.logit(x.row(static_cast<Eigen::Index>(i)).transpose());
      pred.push_back(sigmoid(z) >= threshold ? 1 : 0);
      y.push_back(labels[i] != 0 ? 1 : 0);
      loss += bce_from_logit(z, y.back());
    }
    return std::pair{evaluate(pred, y).f_measure, loss};
  };
  double best_f = -1, best_loss = std::numeric_limits<double>::infinity();
  if (!val_idx.empty()) std::tie(best_f, best_loss) = score(cur);
  m.best_val_f = std::max(best_f, 0.0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    logistic_loss(x, labels, train_idx, cur, cfg.weight_decay, &grad);
    adam.step(ps, grad.spans(), cfg.lr_at(epoch));
    m.train_loss.push_back(logistic_loss(x, labels, train_idx, cur, cfg.weight_decay));
    if (val_idx.empty()) {
      m.head = cur;
      m.best_epoch = epoch + 1;
      continue;
    }
    const auto [f, l] = score(cur);
    if (f > best_f || (f == best_f && l < best_loss)) {
      best_f = f;
      best_loss = l;
      m.head = cur;
      m.best_epoch = epoch + 1;
      m.best_val_f = f;
    }
  }
  return m;
}

}  // namespace ifmavd
