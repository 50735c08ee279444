#pragma once

// Pre-norm transformer encoder over the non-pad prefix of a sequence.
//
// Bidirectional mode runs one stream h under a caller-supplied mask. Two-stream
// mode adds a query stream g that shares every layer weight with h:
//
//   g(m)[z_t] = Attention(Q = g(m-1)[z_t], KV = h(m-1)[z_<t])
//   h(m)[z_t] = Attention(Q = h(m-1)[z_t], KV = h(m-1)[z_<=t])
//
// with h(0) = e(x) + position and g(0) = w + position. Pad positions never enter
// the computation, so outputs cover only the first true_length positions.

#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "mltc/error.hpp"
#include "mltc/model/layers.hpp"
#include "mltc/model/params.hpp"
#include "mltc/tokenizer.hpp"

namespace mltc {

/// A permutation of sequence positions 0..T-1; perm[t] is the t-th position predicted.
struct FactorizationOrder {
  std::vector<std::size_t> perm;

  std::size_t size() const { return perm.size(); }

  static FactorizationOrder identity(std::size_t n) {
    FactorizationOrder z;
    z.perm.resize(n);
    std::iota(z.perm.begin(), z.perm.end(), std::size_t{0});
    return z;
  }

  /// rank[position] = step at which that position appears in the order.
  std::vector<std::size_t> ranks() const {
    std::vector<std::size_t> rank(perm.size(), perm.size());
    for (std::size_t t = 0; t < perm.size(); ++t) {
      if (perm[t] >= perm.size() || rank[perm[t]] != perm.size())
        throw InputError("factorization order is not a permutation of 0.." + std::to_string(perm.size() - 1));
      rank[perm[t]] = t;
    }
    return rank;
  }

  bool operator==(const FactorizationOrder&) const = default;
};

struct OrderMasks {
  Mask content;  // [i][j] = 1 iff j precedes or equals i in the order
  Mask query;    // [i][j] = 1 iff j strictly precedes i in the order
};

inline OrderMasks attention_masks_for_order(const FactorizationOrder& z) {
  const auto rank = z.ranks();
  const auto n = static_cast<Eigen::Index>(z.size());
  OrderMasks m{Mask::Zero(n, n), Mask::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      m.content(i, j) = rank[static_cast<std::size_t>(j)] <= rank[static_cast<std::size_t>(i)];
      m.query(i, j) = rank[static_cast<std::size_t>(j)] < rank[static_cast<std::size_t>(i)];
    }
  return m;
}

inline Mask full_mask(std::size_t n) {
  return Mask::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

inline Mask causal_mask(std::size_t n) {
  return attention_masks_for_order(FactorizationOrder::identity(n)).content;
}

struct StreamLayerCache {
  LayerNormCache ln1, ln2;
  AttentionCache attention;
  FeedForwardCache ff;
};

struct EncoderCache {
  std::vector<TokenId> ids;  // the ids fed to the embedding (after any masking)
  bool two_stream = false;
  Mask content_mask, query_mask;
  std::vector<StreamLayerCache> h_layers, g_layers;
  LayerNormCache final_h, final_g;
};

struct EncoderOutput {
  Matrix hidden;        // T x d content-stream states after the final layer norm
  Matrix query_hidden;  // T x d query-stream states (two-stream mode only)
  EncoderCache cache;

  std::size_t length() const { return static_cast<std::size_t>(hidden.rows()); }
};

namespace detail {

// Post-attention half of a layer: x + FFN(LN2(x)).
inline Matrix ffn_half(const LayerParams& lp, const Matrix& x, StreamLayerCache& c) {
  Matrix n2 = layer_norm_forward(x, lp.ln2_gain, lp.ln2_bias, c.ln2);
  return x + feed_forward(lp, n2, c.ff);
}

inline Matrix ffn_half_backward(const LayerParams& lp, const Matrix& dy, const StreamLayerCache& c,
                                LayerParams& g) {
  Matrix dn2 = feed_forward_backward(lp, dy, c.ff, g);
  return dy + layer_norm_backward(dn2, lp.ln2_gain, c.ln2, g.ln2_gain, g.ln2_bias);
}

inline void check_ids(const Parameters& p, std::span<const TokenId> ids) {
  if (ids.empty()) throw InputError("encoder input has no tokens");
  if (ids.size() > p.config.max_len)
    throw InputError("sequence of " + std::to_string(ids.size()) + " tokens exceeds max_len " +
                     std::to_string(p.config.max_len));
  for (TokenId id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= p.config.vocab_size)
      throw InputError("token id " + std::to_string(id) + " outside the model vocabulary");
}

inline std::span<const TokenId> valid_prefix(const Parameters& p, const TokenizedInput& in) {
  if (in.input_ids.size() != p.config.max_len)
    throw InputError("input length " + std::to_string(in.input_ids.size()) + " does not match model max_len " +
                     std::to_string(p.config.max_len));
  if (in.true_length == 0 || in.true_length > in.input_ids.size())
    throw InputError("input true_length out of range");
  return std::span<const TokenId>(in.input_ids.data(), in.true_length);
}

}  // namespace detail

/// Runs the stack on explicit ids. query_mask == nullptr selects single-stream mode.
inline EncoderOutput run_encoder(const Parameters& p, std::span<const TokenId> ids, const Mask& content_mask,
                                 const Mask* query_mask = nullptr) {
  detail::check_ids(p, ids);
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (content_mask.rows() != n || content_mask.cols() != n ||
      (query_mask && (query_mask->rows() != n || query_mask->cols() != n)))
    throw InputError("attention mask shape does not match sequence length");
  const std::size_t heads = p.config.n_heads;

  EncoderOutput out;
  EncoderCache& c = out.cache;
  c.ids.assign(ids.begin(), ids.end());
  c.two_stream = query_mask != nullptr;
  c.content_mask = content_mask;
  if (query_mask) c.query_mask = *query_mask;

  Matrix h(n, p.token_embedding.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    h.row(i) = p.token_embedding.row(ids[static_cast<std::size_t>(i)]) + p.position_embedding.row(i);
  Matrix g;
  if (c.two_stream) {
    g = p.position_embedding.topRows(n);
    g.rowwise() += p.query_seed.row(0);
  }

  c.h_layers.resize(p.layers.size());
  if (c.two_stream) c.g_layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const LayerParams& lp = p.layers[l];
    StreamLayerCache& hc = c.h_layers[l];
    Matrix hn = layer_norm_forward(h, lp.ln1_gain, lp.ln1_bias, hc.ln1);
    if (c.two_stream) {
      StreamLayerCache& gc = c.g_layers[l];
      Matrix gn = layer_norm_forward(g, lp.ln1_gain, lp.ln1_bias, gc.ln1);
      Matrix g_mid = g + attention_forward(lp, heads, gn, hn, c.query_mask, gc.attention);
      g = detail::ffn_half(lp, g_mid, gc);
    }
    Matrix h_mid = h + attention_forward(lp, heads, hn, hn, c.content_mask, hc.attention);
    h = detail::ffn_half(lp, h_mid, hc);
  }
  out.hidden = layer_norm_forward(h, p.final_ln_gain, p.final_ln_bias, c.final_h);
  if (c.two_stream) out.query_hidden = layer_norm_forward(g, p.final_ln_gain, p.final_ln_bias, c.final_g);
  return out;
}

/// Bidirectional encoding of the non-pad prefix.
inline EncoderOutput forward_encoder(const Parameters& p, const TokenizedInput& input) {
  auto ids = detail::valid_prefix(p, input);
  return run_encoder(p, ids, full_mask(ids.size()));
}

/// Two-stream encoding under factorization order z over the non-pad prefix.
inline EncoderOutput forward_two_stream(const Parameters& p, const TokenizedInput& input,
                                        const FactorizationOrder& z) {
  auto ids = detail::valid_prefix(p, input);
  if (z.size() != ids.size())
    throw InputError("factorization order covers " + std::to_string(z.size()) + " positions, sequence has " +
                     std::to_string(ids.size()));
  OrderMasks masks = attention_masks_for_order(z);
  return run_encoder(p, ids, masks.content, &masks.query);
}

/// Accumulates into grad the gradient of a loss whose derivative w.r.t.
/// out.hidden is d_hidden and w.r.t. out.query_hidden is d_query (may be null).
inline void encoder_backward(const Parameters& p, const EncoderCache& c, const Matrix& d_hidden,
                             const Matrix* d_query, Parameters& grad) {
  const std::size_t heads = p.config.n_heads;
  const bool with_g = c.two_stream && d_query != nullptr;
  Matrix dh = layer_norm_backward(d_hidden, p.final_ln_gain, c.final_h, grad.final_ln_gain, grad.final_ln_bias);
  Matrix dg;
  if (with_g) dg = layer_norm_backward(*d_query, p.final_ln_gain, c.final_g, grad.final_ln_gain, grad.final_ln_bias);

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const LayerParams& lp = p.layers[li];
    LayerParams& lg = grad.layers[li];
    const StreamLayerCache& hc = c.h_layers[li];

    Matrix dh_mid = detail::ffn_half_backward(lp, dh, hc, lg);
    AttentionInputGrads ah = attention_backward(lp, heads, dh_mid, hc.attention, lg);
    Matrix dhn = ah.query_input + ah.kv_input;
    if (with_g) {
      const StreamLayerCache& gc = c.g_layers[li];
      Matrix dg_mid = detail::ffn_half_backward(lp, dg, gc, lg);
      AttentionInputGrads ag = attention_backward(lp, heads, dg_mid, gc.attention, lg);
      dhn += ag.kv_input;
      dg = dg_mid + layer_norm_backward(ag.query_input, lp.ln1_gain, gc.ln1, lg.ln1_gain, lg.ln1_bias);
    }
    dh = dh_mid + layer_norm_backward(dhn, lp.ln1_gain, hc.ln1, lg.ln1_gain, lg.ln1_bias);
  }

  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    grad.token_embedding.row(c.ids[i]) += dh.row(row);
    grad.position_embedding.row(row) += dh.row(row);
    if (with_g) {
      grad.position_embedding.row(row) += dg.row(row);
      grad.query_seed.row(0) += dg.row(row);
    }
  }
}

}  // namespace mltc
