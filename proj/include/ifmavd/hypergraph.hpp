#pragma once

// Function hypergraph: incidence, degrees, the normalized operator
// theta = Dv^-1/2 H W De^-1 H^T Dv^-1/2 and hyperedge convolution.

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "ifmavd/errors.hpp"
#include "ifmavd/kmeans.hpp"
#include "ifmavd/linalg.hpp"

namespace ifmavd {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Column marker for padding hyperedges that hold a single otherwise uncovered function.
inline constexpr int kSingletonEdge = -1;

struct Hypergraph {
  std::vector<std::string> function_ids;  // row order
  std::vector<int> edge_clusters;         // per column: cluster index or kSingletonEdge
  SparseMatrix incidence;                 // n x m, entries in {0,1}
  Vector weights;                         // m, default all ones

  Eigen::Index vertex_count() const { return incidence.rows(); }
  Eigen::Index edge_count() const { return incidence.cols(); }
};

/// Builds the incidence matrix with rows in `function_ids` order and one column per
/// hyperedge (input order), then one singleton column per function left uncovered.
inline Hypergraph incidence(const HyperedgeSet& hyperedges, const std::vector<std::string>& function_ids) {
  std::unordered_map<std::string, Eigen::Index> row;
  for (std::size_t i = 0; i < function_ids.size(); ++i)
    if (!row.emplace(function_ids[i], static_cast<Eigen::Index>(i)).second)
      throw ConfigError("duplicate function id '" + function_ids[i] + "'");

  Hypergraph hg;
  hg.function_ids = function_ids;
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<char> covered(function_ids.size(), 0);
  Eigen::Index col = 0;
  for (const auto& e : hyperedges) {
    if (e.members.empty()) continue;
    for (const auto& f : e.members) {
      auto it = row.find(f);
      if (it == row.end()) throw UnknownFunction(f);
      trips.emplace_back(it->second, col, 1.0);
      covered[static_cast<std::size_t>(it->second)] = 1;
    }
    hg.edge_clusters.push_back(e.cluster);
    ++col;
  }
  for (std::size_t i = 0; i < function_ids.size(); ++i)
    if (!covered[i]) {
      trips.emplace_back(static_cast<Eigen::Index>(i), col++, 1.0);
      hg.edge_clusters.push_back(kSingletonEdge);
    }
  hg.incidence.resize(static_cast<Eigen::Index>(function_ids.size()), col);
  hg.incidence.setFromTriplets(trips.begin(), trips.end(), [](double, double) { return 1.0; });
  hg.weights = Vector::Ones(col);
  return hg;
}

struct DegreeDiags {
  Vector vertex;  // d(v) = sum_e w(e) h(v,e)
  Vector edge;    // delta(e) = sum_v h(v,e)
};

inline DegreeDiags degrees(const SparseMatrix& h, const Vector& w) {
  if (w.size() != h.cols()) throw ShapeMismatch("weight count differs from hyperedge count");
  DegreeDiags d{Vector::Zero(h.rows()), Vector::Zero(h.cols())};
  for (Eigen::Index e = 0; e < h.outerSize(); ++e)
    for (SparseMatrix::InnerIterator it(h, e); it; ++it) {
      d.edge(e) += it.value();
      d.vertex(it.row()) += w(e) * it.value();
    }
  return d;
}

inline DegreeDiags degrees(const Hypergraph& hg) { return degrees(hg.incidence, hg.weights); }

struct NormalizedOperator {
  SparseMatrix theta;
  SparseMatrix delta;  // I - theta
};

namespace detail {

inline void check_positive(const DegreeDiags& d) {
  for (Eigen::Index i = 0; i < d.vertex.size(); ++i)
    if (!(d.vertex(i) > 0)) throw ZeroDegree("vertex " + std::to_string(i) + " has zero degree");
  for (Eigen::Index e = 0; e < d.edge.size(); ++e)
    if (!(d.edge(e) > 0)) throw ZeroDegree("hyperedge " + std::to_string(e) + " has zero degree");
}

}  // namespace detail

inline NormalizedOperator normalized_operator(const SparseMatrix& h, const Vector& w, const DegreeDiags& d) {
  if (w.size() != h.cols() || d.edge.size() != h.cols() || d.vertex.size() != h.rows())
    throw ShapeMismatch("normalized_operator: inconsistent incidence, weight and degree shapes");
  detail::check_positive(d);
  const Vector vs = d.vertex.array().rsqrt();
  const Vector es = w.array() / d.edge.array();
  const SparseMatrix left = vs.asDiagonal() * h;
  const SparseMatrix raw = SparseMatrix(left * es.asDiagonal()) * SparseMatrix(left.transpose());
  // Averaging with the transpose makes theta symmetric bit for bit.
  NormalizedOperator op;
  op.theta = (raw + SparseMatrix(raw.transpose())) * 0.5;
  SparseMatrix eye(h.rows(), h.rows());
  eye.setIdentity();
  op.delta = eye - op.theta;
  return op;
}

inline NormalizedOperator normalized_operator(const Hypergraph& hg) {
  return normalized_operator(hg.incidence, hg.weights, degrees(hg));
}

struct Spectrum {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // columns
};

/// Full symmetric eigendecomposition, used to check positive semi-definiteness.
inline Spectrum spectral_oracle(const Matrix& delta) {
  if (delta.rows() != delta.cols()) throw ShapeMismatch("spectral_oracle needs a square matrix");
  if (delta.size() > 0 && (delta - delta.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw NotSymmetric("matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(delta);
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Precomputed factors for applying theta as vertex -> hyperedge -> vertex messages.
class ThetaOperator {
 public:
  ThetaOperator() = default;
  ThetaOperator(SparseMatrix h, const Vector& w) : h_(std::move(h)) {
    const DegreeDiags d = degrees(h_, w);
    detail::check_positive(d);
    vertex_scale_ = d.vertex.array().rsqrt();
    edge_scale_ = w.array() / d.edge.array();
    ht_ = h_.transpose();
  }
  explicit ThetaOperator(const Hypergraph& hg) : ThetaOperator(hg.incidence, hg.weights) {}

  Eigen::Index size() const { return h_.rows(); }

  /// theta * X without forming theta. Each sum runs over a sorted list of terms,
  /// so relabeling functions permutes the output rows bit for bit.
  Matrix apply(const Matrix& x) const {
    if (x.rows() != h_.rows())
      throw ShapeMismatch("feature rows " + std::to_string(x.rows()) + " vs vertex count " + std::to_string(h_.rows()));
    const Matrix scaled = vertex_scale_.asDiagonal() * x;
    Matrix edge_msg(h_.cols(), x.cols());
    std::vector<double> buf;
    for (Eigen::Index e = 0; e < h_.outerSize(); ++e)
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        buf.clear();
        for (SparseMatrix::InnerIterator it(h_, e); it; ++it) buf.push_back(it.value() * scaled(it.row(), c));
        edge_msg(e, c) = edge_scale_(e) * detail::sorted_sum(buf);
      }
    Matrix out(h_.rows(), x.cols());
    for (Eigen::Index v = 0; v < ht_.outerSize(); ++v)
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        buf.clear();
        for (SparseMatrix::InnerIterator it(ht_, v); it; ++it) buf.push_back(it.value() * edge_msg(it.row(), c));
        out(v, c) = vertex_scale_(v) * detail::sorted_sum(buf);
      }
    return out;
  }

 private:
  SparseMatrix h_, ht_;
  Vector vertex_scale_, edge_scale_;
};

/// Z = act(theta X beta), act = ReLU when `activate`, identity otherwise.
inline Matrix hyperedge_conv(const Matrix& x, const ThetaOperator& theta, const Matrix& beta, bool activate) {
  if (x.cols() != beta.rows())
    throw ShapeMismatch("X has " + std::to_string(x.cols()) + " columns, beta has " + std::to_string(beta.rows()) + " rows");
  Matrix z = detail::rowwise_product(theta.apply(x), beta);
  if (activate) z = z.cwiseMax(0.0);
  return z;
}

inline Matrix hyperedge_conv(const Matrix& x, const SparseMatrix& h, const Vector& w, const Matrix& beta, bool activate) {
  return hyperedge_conv(x, ThetaOperator(h, w), beta, activate);
}

}  // namespace ifmavd
