#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "mltc/error.hpp"
#include "mltc/labelprep.hpp"
#include "mltc/model/params.hpp"

namespace mltc {

inline constexpr double kProbClamp = 1e-7;

struct BceResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d probs, same shape as probs
};

/// Binary cross-entropy averaged over all N x L label slots. probs is N x L,
/// clamped to [eps, 1 - eps] before the logs; clamped entries get zero gradient.
inline BceResult bce_loss(const Matrix& probs, std::span<const LabelVector> targets) {
  if (static_cast<std::size_t>(probs.rows()) != targets.size())
    throw InputError("bce_loss: " + std::to_string(probs.rows()) + " prediction rows vs " +
                     std::to_string(targets.size()) + " target rows");
  const double slots = static_cast<double>(probs.size());
  if (slots == 0) throw InputError("bce_loss: empty batch");
  BceResult r;
  r.grad = Matrix::Zero(probs.rows(), probs.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const auto& y = targets[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(y.size()) != probs.cols())
      throw InputError("bce_loss: target width " + std::to_string(y.size()) + " vs " +
                       std::to_string(probs.cols()) + " predicted labels");
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double raw = probs(i, j);
      const double p = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
      const double t = y[static_cast<std::size_t>(j)];
      total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
      if (raw == p) r.grad(i, j) = -(t / p - (1.0 - t) / (1.0 - p)) / slots;
    }
  }
  r.loss = total / slots;
  return r;
}

}  // namespace mltc
