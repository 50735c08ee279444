#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "mltc/error.hpp"

namespace mltc {

enum class Pooling { first_token, last_token, mean };

inline std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::first_token: return "first_token";
    case Pooling::last_token: return "last_token";
    case Pooling::mean: return "mean";
  }
  return "first_token";
}

inline Pooling parse_pooling(const std::string& s) {
  if (s == "first_token") return Pooling::first_token;
  if (s == "last_token") return Pooling::last_token;
  if (s == "mean") return Pooling::mean;
  throw InputError("unknown pooling '" + s + "' (expected first_token, last_token or mean)");
}

struct ModelConfig {
  std::size_t d_model = 32;
  std::size_t n_heads = 2;
  std::size_t n_layers = 2;
  std::size_t d_ff = 64;
  std::size_t vocab_size = 0;
  std::size_t max_len = 512;
  std::size_t num_labels = 0;
  Pooling pooling = Pooling::first_token;

  std::size_t head_dim() const { return d_model / n_heads; }

  void validate() const {
    require(d_model >= 1 && n_heads >= 1 && n_layers >= 1 && d_ff >= 1 && vocab_size >= 1 && max_len >= 1 &&
                num_labels >= 1,
            "model dimensions must all be >= 1");
    require(d_model % n_heads == 0, "d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                                        std::to_string(n_heads) + ")");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},       {"n_heads", c.n_heads},       {"n_layers", c.n_layers},
                     {"d_ff", c.d_ff},             {"vocab_size", c.vocab_size}, {"max_len", c.max_len},
                     {"num_labels", c.num_labels}, {"pooling", to_string(c.pooling)}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_len = j.value("max_len", c.max_len);
  c.num_labels = j.value("num_labels", c.num_labels);
  if (j.contains("pooling")) c.pooling = parse_pooling(j.at("pooling").get<std::string>());
}

}  // namespace mltc
