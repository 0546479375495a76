#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ifmavd/errors.hpp"
#include "ifmavd/rng.hpp"

namespace ifmavd {

enum class Split { Train, Val, Test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

using SplitMask = std::vector<Split>;

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

inline void check_ratios(const SplitRatios& r) {
  if (r.train < 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
}

namespace detail {

// Cuts an already shuffled index list: floor for train, remainder shared by val/test.
inline void assign_cut(const std::vector<std::size_t>& order, const SplitRatios& r, SplitMask& mask) {
  const std::size_t n = order.size();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.train + 1e-9));
  const std::size_t rem = n - n_train;
  const double val_share = (r.val + r.test) > 0 ? r.val / (r.val + r.test) : 0.5;
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(rem) * val_share + 1e-9));
  for (std::size_t k = 0; k < n; ++k)
    mask[order[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
}

}  // namespace detail

/// Seeded shuffle followed by a contiguous cut. With `labels`, each class is cut separately.
inline SplitMask split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed,
                               const std::vector<int>* stratify_labels = nullptr) {
  check_ratios(ratios);
  if (n < 10) throw TooFewRecords("a split needs at least 10 records, got " + std::to_string(n));
  SplitMask mask(n, Split::Train);
  Rng rng(seed);
  if (stratify_labels == nullptr) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    detail::assign_cut(order, ratios, mask);
    return mask;
  }
  if (stratify_labels->size() != n) throw LengthMismatch("stratification labels differ in length");
  for (int cls : {0, 1}) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i)
      if (((*stratify_labels)[i] != 0) == (cls == 1)) order.push_back(i);
    rng.shuffle(order);
    detail::assign_cut(order, ratios, mask);
  }
  return mask;
}

inline std::vector<std::size_t> indices_of(const SplitMask& mask, Split which) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] == which) out.push_back(i);
  return out;
}

}  // namespace ifmavd
