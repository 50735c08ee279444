#pragma once

// AdamW with bias-corrected moments and decoupled weight decay.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mltc/error.hpp"
#include "mltc/model/params.hpp"

namespace mltc {

struct AdamWConfig {
  double learning_rate = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const {
    require(learning_rate >= 0.0, "learning_rate must be >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
    require(epsilon > 0.0, "epsilon must be > 0");
    require(weight_decay >= 0.0, "weight_decay must be >= 0");
  }
};

struct OptimizerState {
  Parameters first_moment;
  Parameters second_moment;
  std::uint64_t step = 0;
};

inline OptimizerState init_optimizer_state(const Parameters& p) {
  return OptimizerState{zeros_like(p), zeros_like(p), 0};
}

/// One in-place update:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
///   theta -= lr * wd * theta
///   theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
inline void adamw_step(Parameters& params, const Parameters& grads, OptimizerState& state, const AdamWConfig& cfg) {
  std::vector<std::pair<std::string, const Matrix*>> g;
  grads.visit([&](const std::string& name, const Matrix& m) { g.emplace_back(name, &m); });
  for (const auto& [name, m] : g)
    if (!m->allFinite()) throw NumericError("non-finite gradient in parameter '" + name + "'");

  std::vector<Matrix*> m1, m2;
  state.first_moment.visit([&](const std::string&, Matrix& m) { m1.push_back(&m); });
  state.second_moment.visit([&](const std::string&, Matrix& m) { m2.push_back(&m); });
  if (m1.size() != g.size()) throw InputError("optimizer state does not match parameter layout");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  std::size_t i = 0;
  params.visit([&](const std::string& name, Matrix& theta) {
    const Matrix& grad = *g[i].second;
    if (grad.rows() != theta.rows() || grad.cols() != theta.cols())
      throw InputError("gradient shape mismatch for '" + name + "'");
    Matrix& m = *m1[i];
    Matrix& v = *m2[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    if (cfg.weight_decay != 0.0) theta *= (1.0 - cfg.learning_rate * cfg.weight_decay);
    theta.array() -= cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
    ++i;
  });
}

}  // namespace mltc
