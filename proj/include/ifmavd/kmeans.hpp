#pragma once

// k-means over behavior vectors (k-means++ seeding, Lloyd iterations, a
// single-point refinement pass) and grouping of clusters into hyperedges.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ifmavd/errors.hpp"
#include "ifmavd/linalg.hpp"
#include "ifmavd/rng.hpp"

namespace ifmavd {

/// K x d, one row per cluster.
using Centroids = Matrix;

struct KMeansResult {
  Centroids centroids;
  std::vector<int> assignment;  // cluster per input row
  double sse = 0;
  int iterations = 0;
  bool converged = false;
};

/// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
inline int nearest_centroid(const Eigen::Ref<const Vector>& x, const Centroids& c, double* dist = nullptr) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < c.rows(); ++j) {
    const double dj = (c.row(j).transpose() - x).squaredNorm();
    if (dj < bd) {
      bd = dj;
      best = static_cast<int>(j);
    }
  }
  if (dist) *dist = bd;
  return best;
}

/// Cluster index per row of `vectors`. Centroids are not modified.
inline std::vector<int> assign_new(const Matrix& vectors, const Centroids& centroids) {
  if (centroids.rows() == 0) throw ConfigError("no centroids to assign against");
  if (vectors.rows() > 0 && vectors.cols() != centroids.cols())
    throw ShapeMismatch("vector dimension " + std::to_string(vectors.cols()) + " vs centroid dimension " +
                        std::to_string(centroids.cols()));
  std::vector<int> out(static_cast<std::size_t>(vectors.rows()));
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) out[static_cast<std::size_t>(i)] = nearest_centroid(vectors.row(i).transpose(), centroids);
  return out;
}

inline double within_sse(const Matrix& x, const Centroids& c, const std::vector<int>& a) {
  double s = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s += (x.row(i) - c.row(a[static_cast<std::size_t>(i)])).squaredNorm();
  return s;
}

namespace detail {

inline Centroids kmeanspp_seed(const Matrix& x, int k, Rng& rng) {
  const auto n = x.rows();
  std::vector<Eigen::Index> chosen{static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)))};
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (x.row(i) - x.row(chosen[0])).squaredNorm();
  while (static_cast<int>(chosen.size()) < k) {
    double total = 0;
    for (double v : d2) total += v;
    if (total <= 0) break;  // every point coincides with a chosen centroid
    const double u = rng.uniform() * total;
    double acc = 0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = d2[static_cast<std::size_t>(i)];
      if (w <= 0) continue;
      acc += w;
      pick = i;
      if (acc > u) break;
    }
    chosen.push_back(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (x.row(i) - x.row(pick)).squaredNorm());
  }
  Centroids c(static_cast<Eigen::Index>(chosen.size()), x.cols());
  for (std::size_t j = 0; j < chosen.size(); ++j) c.row(static_cast<Eigen::Index>(j)) = x.row(chosen[j]);
  return c;
}

inline void recompute_means(const Matrix& x, const std::vector<int>& a, Centroids& c, std::vector<int>& sizes) {
  Centroids sum = Centroids::Zero(c.rows(), c.cols());
  sizes.assign(static_cast<std::size_t>(c.rows()), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sum.row(a[static_cast<std::size_t>(i)]) += x.row(i);
    ++sizes[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
  }
  for (Eigen::Index j = 0; j < c.rows(); ++j)
    if (sizes[static_cast<std::size_t>(j)] > 0) c.row(j) = sum.row(j) / static_cast<double>(sizes[static_cast<std::size_t>(j)]);
}

// Moves each point to another cluster when that strictly lowers the total SSE.
// Returns the number of moves made.
inline int refine_single_moves(const Matrix& x, std::vector<int>& a, Centroids& c, std::vector<int>& sizes) {
  int moves = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int from = a[static_cast<std::size_t>(i)];
    const int nf = sizes[static_cast<std::size_t>(from)];
    if (nf <= 1) continue;
    const double df = (x.row(i) - c.row(from)).squaredNorm();
    const double removal_gain = df * nf / (nf - 1.0);
    int best = from;
    double best_delta = -1e-12 * std::max(1.0, removal_gain);
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      if (j == from) continue;
      const int nj = sizes[static_cast<std::size_t>(j)];
      const double add_cost = (x.row(i) - c.row(j)).squaredNorm() * nj / (nj + 1.0);
      const double delta = add_cost - removal_gain;
      if (delta < best_delta) {
        best_delta = delta;
        best = static_cast<int>(j);
      }
    }
    if (best == from) continue;
    const int nb = sizes[static_cast<std::size_t>(best)];
    c.row(from) = (c.row(from) * nf - x.row(i)) / (nf - 1.0);
    c.row(best) = (c.row(best) * nb + x.row(i)) / (nb + 1.0);
    --sizes[static_cast<std::size_t>(from)];
    ++sizes[static_cast<std::size_t>(best)];
    a[static_cast<std::size_t>(i)] = best;
    ++moves;
  }
  return moves;
}

}  // namespace detail

/// Partitions the rows of `vectors` into at most k clusters. The effective k shrinks
/// to the number of distinct rows when that is smaller.
inline KMeansResult kmeans(const Matrix& vectors, int k, std::uint64_t seed, int max_iters = 100) {
  if (vectors.rows() == 0) throw ConfigError("k-means needs at least one vector");
  if (k < 1) throw ConfigError("k-means needs k >= 1");
  if (max_iters < 1) throw ConfigError("k-means needs max_iters >= 1");
  Rng rng(seed);
  KMeansResult r;
  r.centroids = detail::kmeanspp_seed(vectors, k, rng);
  const auto n = vectors.rows();
  r.assignment.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> sizes;

  while (r.iterations < max_iters) {
    // Lloyd until the assignment stops changing.
    bool changed = false;
    for (; r.iterations < max_iters; ++r.iterations) {
      changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int j = nearest_centroid(vectors.row(i).transpose(), r.centroids);
        if (j != r.assignment[static_cast<std::size_t>(i)]) {
          r.assignment[static_cast<std::size_t>(i)] = j;
          changed = true;
        }
      }
      detail::recompute_means(vectors, r.assignment, r.centroids, sizes);
      for (Eigen::Index j = 0; j < r.centroids.rows(); ++j) {
        if (sizes[static_cast<std::size_t>(j)] > 0) continue;
        // Re-seed the empty cluster at the point farthest from its own centroid.
        Eigen::Index far = 0;
        double fd = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double di = (vectors.row(i) - r.centroids.row(r.assignment[static_cast<std::size_t>(i)])).squaredNorm();
          if (di > fd && sizes[static_cast<std::size_t>(r.assignment[static_cast<std::size_t>(i)])] > 1) {
            fd = di;
            far = i;
          }
        }
        r.assignment[static_cast<std::size_t>(far)] = static_cast<int>(j);
        detail::recompute_means(vectors, r.assignment, r.centroids, sizes);
        changed = true;
      }
      if (!changed) break;
    }
    if (changed) break;  // ran out of iterations
    if (detail::refine_single_moves(vectors, r.assignment, r.centroids, sizes) == 0) {
      r.converged = true;
      break;
    }
    detail::recompute_means(vectors, r.assignment, r.centroids, sizes);
    ++r.iterations;
  }
  r.sse = within_sse(vectors, r.centroids, r.assignment);
  return r;
}

struct BehaviorAssignment {
  std::string function_id;
  int cluster = 0;
};

using ClusterAssignment = std::vector<BehaviorAssignment>;

struct Hyperedge {
  int cluster = 0;
  std::vector<std::string> members;  // distinct function ids, sorted
  friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
};

using HyperedgeSet = std::vector<Hyperedge>;

/// One hyperedge per non-empty cluster (ascending index) whose distinct member
/// count reaches `min_members`.
inline HyperedgeSet build_hyperedges(const ClusterAssignment& assignment, std::size_t min_members = 1) {
  std::map<int, std::set<std::string>> groups;
  for (const auto& b : assignment) groups[b.cluster].insert(b.function_id);
  HyperedgeSet out;
  for (auto& [c, m] : groups)
    if (!m.empty() && m.size() >= min_members) out.push_back({c, {m.begin(), m.end()}});
  return out;
}

}  // namespace ifmavd
