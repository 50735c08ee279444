#pragma once

// Trainable tensors of the encoder. Every tensor is a dense matrix; biases and
// layer-norm vectors are 1 x n rows so optimizers can treat all of them alike.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mltc/model/config.hpp"

namespace mltc {

using Matrix = Eigen::MatrixXd;

struct LayerParams {
  Matrix ln1_gain, ln1_bias;
  Matrix w_query, b_query, w_key, b_key, w_value, b_value, w_out, b_out;
  Matrix ln2_gain, ln2_bias;
  Matrix w_ff1, b_ff1, w_ff2, b_ff2;

  template <typename Self, typename F>
  static void visit_impl(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "ln1_gain", self.ln1_gain);
    f(prefix + "ln1_bias", self.ln1_bias);
    f(prefix + "w_query", self.w_query);
    f(prefix + "b_query", self.b_query);
    f(prefix + "w_key", self.w_key);
    f(prefix + "b_key", self.b_key);
    f(prefix + "w_value", self.w_value);
    f(prefix + "b_value", self.b_value);
    f(prefix + "w_out", self.w_out);
    f(prefix + "b_out", self.b_out);
    f(prefix + "ln2_gain", self.ln2_gain);
    f(prefix + "ln2_bias", self.ln2_bias);
    f(prefix + "w_ff1", self.w_ff1);
    f(prefix + "b_ff1", self.b_ff1);
    f(prefix + "w_ff2", self.w_ff2);
    f(prefix + "b_ff2", self.b_ff2);
  }
};

struct Parameters {
  ModelConfig config;
  Matrix token_embedding;     // vocab_size x d_model, also the tied output projection
  Matrix position_embedding;  // max_len x d_model
  Matrix query_seed;          // 1 x d_model, initial query-stream state
  std::vector<LayerParams> layers;
  Matrix final_ln_gain, final_ln_bias;
  Matrix head_weight;  // d_model x num_labels
  Matrix head_bias;    // 1 x num_labels

  /// Calls f(name, matrix) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  bool operator==(const Parameters& o) const {
    if (!(config == o.config) || layers.size() != o.layers.size()) return false;
    std::vector<const Matrix*> mine, theirs;
    visit([&](const std::string&, const Matrix& m) { mine.push_back(&m); });
    o.visit([&](const std::string&, const Matrix& m) { theirs.push_back(&m); });
    for (std::size_t i = 0; i < mine.size(); ++i) {
      if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols()) return false;
      if (*mine[i] != *theirs[i]) return false;
    }
    return true;
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f(std::string("token_embedding"), self.token_embedding);
    f(std::string("position_embedding"), self.position_embedding);
    f(std::string("query_seed"), self.query_seed);
    for (std::size_t i = 0; i < self.layers.size(); ++i)
      LayerParams::visit_impl(self.layers[i], "layer" + std::to_string(i) + ".", f);
    f(std::string("final_ln_gain"), self.final_ln_gain);
    f(std::string("final_ln_bias"), self.final_ln_bias);
    f(std::string("head_weight"), self.head_weight);
    f(std::string("head_bias"), self.head_bias);
  }
};

/// Same shapes, all zeros. Used as a gradient accumulator.
inline Parameters zeros_like(const Parameters& p) {
  Parameters z = p;
  z.visit([](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

/// Closed-form tensor size count for a config.
inline std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_model, f = c.d_ff;
  const std::size_t per_layer = 4 * d            // two layer norms
                                + 4 * (d * d + d)  // query, key, value, output projections
                                + (d * f + f) + (f * d + d);
  return c.vocab_size * d + c.max_len * d + d + c.n_layers * per_layer + 2 * d + d * c.num_labels + c.num_labels;
}

inline Parameters init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> embed_dist(0.0, 0.02);
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto ff = static_cast<Eigen::Index>(cfg.d_ff);

  auto normal = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = embed_dist(rng);
    return m;
  };
  auto xavier = [&](Eigen::Index fan_in, Eigen::Index fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < fan_in; ++i)
      for (Eigen::Index j = 0; j < fan_out; ++j) m(i, j) = u(rng);
    return m;
  };
  auto zeros = [](Eigen::Index n) { return Matrix::Zero(1, n); };
  auto ones = [](Eigen::Index n) { return Matrix::Ones(1, n); };

  Parameters p;
  p.config = cfg;
  p.token_embedding = normal(static_cast<Eigen::Index>(cfg.vocab_size), d);
  p.position_embedding = normal(static_cast<Eigen::Index>(cfg.max_len), d);
  p.query_seed = normal(1, d);
  p.layers.resize(cfg.n_layers);
  for (auto& l : p.layers) {
    l.ln1_gain = ones(d);
    l.ln1_bias = zeros(d);
    l.w_query = xavier(d, d);
    l.b_query = zeros(d);
    l.w_key = xavier(d, d);
    l.b_key = zeros(d);
    l.w_value = xavier(d, d);
    l.b_value = zeros(d);
    l.w_out = xavier(d, d);
    l.b_out = zeros(d);
    l.ln2_gain = ones(d);
    l.ln2_bias = zeros(d);
    l.w_ff1 = xavier(d, ff);
    l.b_ff1 = zeros(ff);
    l.w_ff2 = xavier(ff, d);
    l.b_ff2 = zeros(d);
  }
  p.final_ln_gain = ones(d);
  p.final_ln_bias = zeros(d);
  p.head_weight = xavier(d, static_cast<Eigen::Index>(cfg.num_labels));
  p.head_bias = zeros(static_cast<Eigen::Index>(cfg.num_labels));
  return p;
}

}  // namespace mltc
