#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ifmavd/rng.hpp"

namespace ifmavd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Glorot-uniform initialization drawn from `rng` in column-major order.
inline Matrix glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

namespace detail {

// Row i of the result depends only on row i of `a`, accumulated over k in a fixed
// order, so permuting the rows of `a` permutes the result bit for bit.
inline Matrix rowwise_product(const Matrix& a, const Matrix& b) {
  const RowMatrix br = b;
  const RowMatrix ar = a;
  RowMatrix out = RowMatrix::Zero(a.rows(), b.cols());
  const Eigen::Index n = a.rows(), depth = a.cols(), m = b.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    double* o = out.data() + i * m;
    const double* ai = ar.data() + i * depth;
    for (Eigen::Index k = 0; k < depth; ++k) {
      const double aik = ai[k];
      const double* bk = br.data() + k * m;
      for (Eigen::Index j = 0; j < m; ++j) o[j] += aik * bk[j];
    }
  }
  return out;
}

inline double sorted_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

}  // namespace ifmavd
