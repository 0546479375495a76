#pragma once

#include <cstddef>
#include <vector>

#include "ifmavd/errors.hpp"

namespace ifmavd {

/// Confusion counts with recall, precision and F-measure (2TP / (2TP + FP + FN)).
/// Ratios whose denominator is zero are reported as 0.
struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double recall = 0, precision = 0, f_measure = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m{tp, fp, fn, tn, 0, 0, 0};
  const auto d = [](std::size_t x) { return static_cast<double>(x); };
  if (tp + fn > 0) m.recall = d(tp) / d(tp + fn);
  if (tp + fp > 0) m.precision = d(tp) / d(tp + fp);
  if (2 * tp + fp + fn > 0) m.f_measure = 2.0 * d(tp) / d(2 * tp + fp + fn);
  return m;
}

/// `predictions` and `labels` hold 1 for vulnerable and 0 for clean.
inline Metrics evaluate(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw LengthMismatch("predictions and labels differ in length");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] != 0, y = labels[i] != 0;
    if (p && y) ++tp;
    else if (p) ++fp;
    else if (y) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

}  // namespace ifmavd
