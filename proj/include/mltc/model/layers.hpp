#pragma once

// Forward/backward kernels for the encoder: layer norm, GELU feed-forward and
// masked multi-head attention. Each forward fills a cache; the matching
// backward consumes it, accumulates parameter gradients and returns the input
// gradient.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mltc/model/params.hpp"

namespace mltc {

/// 1 = key column visible to the query row.
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kLayerNormEps = 1e-5;

// ---- layer norm ---------------------------------------------------------

struct LayerNormCache {
  Matrix normalized;    // x_hat
  Eigen::VectorXd rstd;  // per row
};

inline Matrix layer_norm_forward(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.normalized.resize(n, d);
  cache.rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd(i) = rstd;
    cache.normalized.row(i) = (x.row(i).array() - mean) * rstd;
  }
  Matrix y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain, const LayerNormCache& cache,
                                  Matrix& dgain, Matrix& dbias) {
  const Eigen::Index n = dy.rows();
  const auto d = static_cast<double>(dy.cols());
  dgain.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean_dxhat = dxhat.row(i).sum() / d;
    const double mean_dxhat_xhat = dxhat.row(i).dot(cache.normalized.row(i)) / d;
    dx.row(i) = cache.rstd(i) *
                (dxhat.row(i).array() - mean_dxhat - cache.normalized.row(i).array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

// ---- affine -------------------------------------------------------------

inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

inline Matrix affine_backward(const Matrix& x, const Matrix& dy, const Matrix& w, Matrix& dw, Matrix& db) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  return dy * w.transpose();
}

// ---- feed-forward -------------------------------------------------------

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

inline double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + 0.044715 * u * u * u))); }

inline double gelu_grad(double u) {
  const double inner = kGeluC * (u + 0.044715 * u * u * u);
  const double t = std::tanh(inner);
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
}

struct FeedForwardCache {
  Matrix input, pre_activation, activation;
};

inline Matrix feed_forward(const LayerParams& lp, const Matrix& x, FeedForwardCache& cache) {
  cache.input = x;
  cache.pre_activation = affine(x, lp.w_ff1, lp.b_ff1);
  cache.activation = cache.pre_activation.unaryExpr([](double u) { return gelu(u); });
  return affine(cache.activation, lp.w_ff2, lp.b_ff2);
}

inline Matrix feed_forward_backward(const LayerParams& lp, const Matrix& dy, const FeedForwardCache& cache,
                                    LayerParams& grad) {
  Matrix da = affine_backward(cache.activation, dy, lp.w_ff2, grad.w_ff2, grad.b_ff2);
  Matrix du = da.array() * cache.pre_activation.unaryExpr([](double u) { return gelu_grad(u); }).array();
  return affine_backward(cache.input, du, lp.w_ff1, grad.w_ff1, grad.b_ff1);
}

// ---- attention ----------------------------------------------------------

struct AttentionCache {
  Matrix query_input, kv_input;
  Matrix queries, keys, values;
  std::vector<Matrix> probs;  // one (n_query x n_key) matrix per head
  Matrix context;
};

/// Row-wise softmax over mask==1 entries. Rows with no visible key are all zero.
inline Matrix masked_softmax(const Matrix& scores, const Mask& mask) {
  Matrix out = Matrix::Zero(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < scores.cols(); ++j)
      if (mask(i, j)) mx = std::max(mx, scores(i, j));
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (!mask(i, j)) continue;
      out(i, j) = std::exp(scores(i, j) - mx);
      sum += out(i, j);
    }
    out.row(i) /= sum;
  }
  return out;
}

inline Matrix attention_forward(const LayerParams& lp, std::size_t n_heads, const Matrix& query_input,
                                const Matrix& kv_input, const Mask& mask, AttentionCache& cache) {
  const Eigen::Index d = query_input.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.query_input = query_input;
  cache.kv_input = kv_input;
  cache.queries = affine(query_input, lp.w_query, lp.b_query);
  cache.keys = affine(kv_input, lp.w_key, lp.b_key);
  cache.values = affine(kv_input, lp.w_value, lp.b_value);
  cache.probs.resize(n_heads);
  cache.context.resize(query_input.rows(), d);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
    Matrix scores = (cache.queries.middleCols(off, dh) * cache.keys.middleCols(off, dh).transpose()) * scale;
    cache.probs[h] = masked_softmax(scores, mask);
    cache.context.middleCols(off, dh).noalias() = cache.probs[h] * cache.values.middleCols(off, dh);
  }
  return affine(cache.context, lp.w_out, lp.b_out);
}

struct AttentionInputGrads {
  Matrix query_input;
  Matrix kv_input;
};

inline AttentionInputGrads attention_backward(const LayerParams& lp, std::size_t n_heads, const Matrix& dy,
                                              const AttentionCache& cache, LayerParams& grad) {
  const Eigen::Index d = cache.queries.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dcontext = affine_backward(cache.context, dy, lp.w_out, grad.w_out, grad.b_out);
  Matrix dq = Matrix::Zero(cache.queries.rows(), d);
  Matrix dk = Matrix::Zero(cache.keys.rows(), d);
  Matrix dv = Matrix::Zero(cache.values.rows(), d);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
    const Matrix& a = cache.probs[h];
    Matrix dctx_h = dcontext.middleCols(off, dh);
    Matrix da = dctx_h * cache.values.middleCols(off, dh).transpose();
    dv.middleCols(off, dh).noalias() += a.transpose() * dctx_h;
    Eigen::VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
    Matrix dscores = a.array() * (da.colwise() - row_dot).array();
    dq.middleCols(off, dh).noalias() += (dscores * cache.keys.middleCols(off, dh)) * scale;
    dk.middleCols(off, dh).noalias() += (dscores.transpose() * cache.queries.middleCols(off, dh)) * scale;
  }
  AttentionInputGrads out;
  out.query_input = affine_backward(cache.query_input, dq, lp.w_query, grad.w_query, grad.b_query);
  out.kv_input = affine_backward(cache.kv_input, dk, lp.w_key, grad.w_key, grad.b_key);
  out.kv_input += affine_backward(cache.kv_input, dv, lp.w_value, grad.w_value, grad.b_value);
  return out;
}

}  // namespace mltc
