#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ifmavd/errors.hpp"

namespace ifmavd {

/// How the single "gamma" hyperparameter is applied.
enum class GammaMode {
  LrDecay,    // lr_e = lr * gamma^floor(e / decay_step), Adam beta1 = 0.9
  AdamBeta1,  // constant lr, Adam beta1 = gamma
};

inline std::string_view to_string(GammaMode m) { return m == GammaMode::LrDecay ? "lr_decay" : "adam_beta1"; }

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  double gamma = 0.9;
  GammaMode gamma_mode = GammaMode::LrDecay;
  int decay_step = 100;  // epochs between lr decays; 1 decays every epoch
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
  int batch_size = 0;  // intra-function encoder only; 0 means full batch. Detector training is always full-batch

  void validate() const {
    if (epochs < 0 || learning_rate <= 0 || gamma <= 0 || gamma > 1 || weight_decay < 0 || batch_size < 0 || decay_step < 1)
      throw ConfigError("invalid training configuration");
  }

  double lr_at(int epoch) const {
    return gamma_mode == GammaMode::LrDecay ? learning_rate * std::pow(gamma, epoch / decay_step) : learning_rate;
  }
  double beta1() const { return gamma_mode == GammaMode::AdamBeta1 ? gamma : 0.9; }
};

/// A flat list of parameter tensors, each exposed as a contiguous span.
using ParamSpans = std::vector<std::span<double>>;

inline double squared_norm(const ParamSpans& ps) {
  double s = 0;
  for (auto p : ps)
    for (double v : p) s += v * v;
  return s;
}

/// grads += 2 * wd * params, the gradient of wd * ||params||^2.
inline void add_weight_decay(const ParamSpans& params, const ParamSpans& grads, double wd) {
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k].size(); ++i) grads[k][i] += 2.0 * wd * params[k][i];
}

class Adam {
 public:
  Adam(std::size_t n, double beta1, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const ParamSpans& params, const ParamSpans& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    std::size_t off = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < params[k].size(); ++i, ++off) {
        const double g = grads[k][i];
        m_[off] = beta1_ * m_[off] + (1 - beta1_) * g;
        v_[off] = beta2_ * v_[off] + (1 - beta2_) * g * g;
        params[k][i] -= lr * (m_[off] / c1) / (std::sqrt(v_[off] / c2) + eps_);
      }
    }
    if (off != m_.size()) throw ShapeMismatch("Adam state size does not match parameter count");
  }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

inline std::size_t total_size(const ParamSpans& ps) {
  std::size_t n = 0;
  for (auto p : ps) n += p.size();
  return n;
}

}  // namespace ifmavd
