#pragma once

// Training objectives on top of the encoder:
//  * sigmoid multi-label head over a pooled content state,
//  * masked-token prediction (bidirectional mask, loss on masked positions only),
//  * permutation language modeling through the query stream.
// Token predictions share the input embedding: logits = state * E^T.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mltc/error.hpp"
#include "mltc/model/encoder.hpp"
#include "mltc/model/params.hpp"
#include "mltc/tokenizer.hpp"

namespace mltc {

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// ---- classification head -------------------------------------------------

struct ClassifyOutput {
  EncoderOutput encoder;
  Matrix pooled;  // 1 x d
  Matrix probs;   // 1 x L
};

inline Matrix pool(const Matrix& hidden, Pooling pooling) {
  switch (pooling) {
    case Pooling::first_token: return hidden.topRows(1);
    case Pooling::last_token: return hidden.bottomRows(1);
    case Pooling::mean: return hidden.colwise().mean();
  }
  return hidden.topRows(1);
}

inline Matrix pool_backward(const Matrix& d_pooled, Eigen::Index rows, Pooling pooling) {
  Matrix d = Matrix::Zero(rows, d_pooled.cols());
  switch (pooling) {
    case Pooling::first_token: d.row(0) = d_pooled.row(0); break;
    case Pooling::last_token: d.row(rows - 1) = d_pooled.row(0); break;
    case Pooling::mean: d.rowwise() = d_pooled.row(0) / static_cast<double>(rows); break;
  }
  return d;
}

/// Bidirectional encoding, pooling, affine head, elementwise sigmoid.
inline ClassifyOutput classify_forward(const Parameters& p, const TokenizedInput& input) {
  ClassifyOutput out;
  out.encoder = forward_encoder(p, input);
  out.pooled = pool(out.encoder.hidden, p.config.pooling);
  Matrix logits = affine(out.pooled, p.head_weight, p.head_bias);
  out.probs = logits.unaryExpr([](double x) { return sigmoid(x); });
  return out;
}

inline std::vector<double> classify(const Parameters& p, const TokenizedInput& input) {
  Matrix probs = classify_forward(p, input).probs;
  return std::vector<double>(probs.data(), probs.data() + probs.size());
}

/// d_probs: gradient of the loss w.r.t. this example's probabilities (1 x L).
inline void classify_backward(const Parameters& p, const ClassifyOutput& fwd, const Matrix& d_probs,
                              Parameters& grad) {
  Matrix d_logits = d_probs.array() * fwd.probs.array() * (1.0 - fwd.probs.array());
  Matrix d_pooled = affine_backward(fwd.pooled, d_logits, p.head_weight, grad.head_weight, grad.head_bias);
  Matrix d_hidden = pool_backward(d_pooled, fwd.encoder.hidden.rows(), p.config.pooling);
  encoder_backward(p, fwd.encoder.cache, d_hidden, nullptr, grad);
}

// ---- token prediction ----------------------------------------------------

struct LossAndGrad {
  double loss = 0.0;
  Parameters grad;
  std::size_t predictions = 0;  // number of predicted tokens behind the loss
};

/// Sum over rows of -log softmax(states * E^T)[target] times weight; adds weight *
/// gradient to grad.token_embedding and returns d states (already weighted).
inline double token_nll(const Parameters& p, const Matrix& states, std::span<const TokenId> targets, double weight,
                        Parameters& grad, Matrix& d_states) {
  Matrix logits = states * p.token_embedding.transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
    const double z = e.sum();
    const TokenId t = targets[static_cast<std::size_t>(i)];
    total += std::log(z) + mx - logits(i, t);
    logits.row(i) = e / z;
    logits(i, t) -= 1.0;
  }
  logits *= weight;  // now d loss / d logits
  grad.token_embedding.noalias() += logits.transpose() * states;
  d_states = logits * p.token_embedding;
  return total;
}

// ---- masked-token objective ----------------------------------------------

/// Positions eligible for masking: the non-pad prefix minus [CLS] and [SEP].
inline std::vector<std::size_t> maskable_positions(const TokenizedInput& in) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < in.true_length; ++i) {
    const TokenId id = in.input_ids[i];
    if (id != special::kCls && id != special::kSep && id != special::kPad) out.push_back(i);
  }
  return out;
}

/// Each maskable position is selected independently with probability mask_rate.
/// A sequence that draws none gets one position picked uniformly, so every
/// sequence contributes to the loss.
inline std::vector<std::vector<std::size_t>> sample_mlm_positions(std::span<const TokenizedInput> batch,
                                                                  double mask_rate, std::uint64_t seed) {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw InputError("mask_rate must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<std::size_t>> chosen(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto cand = maskable_positions(batch[b]);
    if (cand.empty()) throw InputError("mlm: sequence " + std::to_string(b) + " has no maskable tokens");
    for (std::size_t pos : cand)
      if (u(rng) < mask_rate) chosen[b].push_back(pos);
    if (chosen[b].empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
      chosen[b].push_back(cand[pick(rng)]);
    }
  }
  return chosen;
}

/// Mean negative log-likelihood of the original ids at the given masked positions.
inline LossAndGrad mlm_loss_at(const Parameters& p, std::span<const TokenizedInput> batch,
                               const std::vector<std::vector<std::size_t>>& positions) {
  if (batch.empty()) throw InputError("mlm: empty batch");
  LossAndGrad r{0.0, zeros_like(p), 0};
  for (const auto& ps : positions) r.predictions += ps.size();
  if (r.predictions == 0) throw InputError("mlm: no masked positions");
  const double weight = 1.0 / static_cast<double>(r.predictions);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto ids_span = detail::valid_prefix(p, batch[b]);
    std::vector<TokenId> ids(ids_span.begin(), ids_span.end());
    std::vector<TokenId> targets;
    for (std::size_t pos : positions[b]) {
      if (pos >= ids.size()) throw InputError("mlm: masked position beyond sequence length");
      targets.push_back(ids[pos]);
      ids[pos] = special::kMask;
    }
    if (targets.empty()) continue;
    EncoderOutput enc = run_encoder(p, ids, full_mask(ids.size()));
    Matrix states(static_cast<Eigen::Index>(targets.size()), enc.hidden.cols());
    for (std::size_t k = 0; k < targets.size(); ++k)
      states.row(static_cast<Eigen::Index>(k)) = enc.hidden.row(static_cast<Eigen::Index>(positions[b][k]));
    Matrix d_states;
    r.loss += weight * token_nll(p, states, targets, weight, r.grad, d_states);
    Matrix d_hidden = Matrix::Zero(enc.hidden.rows(), enc.hidden.cols());
    for (std::size_t k = 0; k < targets.size(); ++k)
      d_hidden.row(static_cast<Eigen::Index>(positions[b][k])) += d_states.row(static_cast<Eigen::Index>(k));
    encoder_backward(p, enc.cache, d_hidden, nullptr, r.grad);
  }
  return r;
}

inline LossAndGrad mlm_loss(const Parameters& p, std::span<const TokenizedInput> batch, double mask_rate,
                            std::uint64_t seed) {
  return mlm_loss_at(p, batch, sample_mlm_positions(batch, mask_rate, seed));
}

// ---- permutation objective -----------------------------------------------

inline std::vector<FactorizationOrder> sample_factorization_orders(std::size_t length, std::size_t n,
                                                                   std::uint64_t seed) {
  require(length >= 1 && n >= 1, "sample_factorization_orders needs length >= 1 and n >= 1");
  std::mt19937_64 rng(seed);
  std::vector<FactorizationOrder> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    FactorizationOrder z = FactorizationOrder::identity(length);
    for (std::size_t i = length - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(z.perm[i], z.perm[pick(rng)]);
    }
    out.push_back(std::move(z));
  }
  return out;
}

/// Number of trailing order steps that are predicted.
inline std::size_t predicted_count(std::size_t length, double predict_fraction) {
  if (!(predict_fraction > 0.0 && predict_fraction <= 1.0))
    throw InputError("predict_fraction must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(predict_fraction * static_cast<double>(length) - 1e-9));
  if (k == 0) throw InputError("plm: empty prediction set");
  return std::min(k, length);
}

/// orders[b] holds the sampled orders for batch[b]. For each (sequence, order)
/// pair the loss is the mean NLL of x[z_t] read from the query stream at z_t over
/// the last ceil(predict_fraction * T) steps; the result averages those pairs.
inline LossAndGrad plm_loss(const Parameters& p, std::span<const TokenizedInput> batch,
                            const std::vector<std::vector<FactorizationOrder>>& orders, double predict_fraction) {
  if (batch.empty()) throw InputError("plm: empty batch");
  if (orders.size() != batch.size()) throw InputError("plm: need one order list per sequence");
  std::size_t pairs = 0;
  for (const auto& os : orders) {
    if (os.empty()) throw InputError("plm: every sequence needs at least one factorization order");
    pairs += os.size();
  }
  LossAndGrad r{0.0, zeros_like(p), 0};
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto ids = detail::valid_prefix(p, batch[b]);
    for (const auto& z : orders[b]) {
      const std::size_t k = predicted_count(ids.size(), predict_fraction);
      EncoderOutput enc = forward_two_stream(p, batch[b], z);
      std::vector<std::size_t> where(z.perm.end() - static_cast<std::ptrdiff_t>(k), z.perm.end());
      std::vector<TokenId> targets;
      Matrix states(static_cast<Eigen::Index>(k), enc.query_hidden.cols());
      for (std::size_t i = 0; i < k; ++i) {
        targets.push_back(ids[where[i]]);
        states.row(static_cast<Eigen::Index>(i)) = enc.query_hidden.row(static_cast<Eigen::Index>(where[i]));
      }
      const double weight = 1.0 / (static_cast<double>(pairs) * static_cast<double>(k));
      Matrix d_states;
      r.loss += weight * token_nll(p, states, targets, weight, r.grad, d_states);
      r.predictions += k;
      Matrix d_query = Matrix::Zero(enc.query_hidden.rows(), enc.query_hidden.cols());
      for (std::size_t i = 0; i < k; ++i)
        d_query.row(static_cast<Eigen::Index>(where[i])) += d_states.row(static_cast<Eigen::Index>(i));
      Matrix d_hidden = Matrix::Zero(enc.hidden.rows(), enc.hidden.cols());
      encoder_backward(p, enc.cache, d_hidden, &d_query, r.grad);
    }
  }
  return r;
}

}  // namespace mltc
