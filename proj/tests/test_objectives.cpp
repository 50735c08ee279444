#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "mltc/model/objectives.hpp"
#include "mltc/train/loss.hpp"
#include "oracles.hpp"

using namespace mltc;

namespace {

ModelConfig tiny(std::size_t d = 8, std::size_t heads = 2, std::size_t layers = 2) {
  ModelConfig c;
  c.d_model = d;
  c.n_heads = heads;
  c.n_layers = layers;
  c.d_ff = 12;
  c.vocab_size = 11;
  c.max_len = 8;
  c.num_labels = 3;
  c.pooling = Pooling::mean;
  return c;
}

TokenizedInput input_of(const std::vector<TokenId>& ids, std::size_t max_len) {
  TokenizedInput t;
  t.input_ids = ids;
  t.true_length = ids.size();
  t.input_ids.resize(max_len, special::kPad);
  t.attention_mask.assign(max_len, 0);
  std::fill_n(t.attention_mask.begin(), ids.size(), std::uint8_t{1});
  t.segment_ids.assign(max_len, 0);
  return t;
}

std::vector<TokenizedInput> two_sequences(std::size_t max_len) {
  return {input_of({2, 5, 9, 6, 1, 3}, max_len), input_of({2, 7, 10, 3}, max_len)};
}

}  // namespace

TEST(Mlm, UniformLogitsGiveLogV) {
  Parameters p = oracle::random_params(tiny(), 1);
  p.token_embedding.setZero();
  auto r = mlm_loss(p, two_sequences(8), 0.5, 3);
  EXPECT_NEAR(r.loss, std::log(11.0), 1e-12);
}

TEST(Mlm, MaskRateNearFifteenPercent) {
  std::vector<TokenizedInput> batch;
  std::size_t maskable = 0;
  for (int i = 0; i < 250; ++i) {
    std::vector<TokenId> ids = {special::kCls};
    for (int j = 0; j < 48; ++j) ids.push_back(5 + (i + j) % 6);
    ids.push_back(special::kSep);
    batch.push_back(input_of(ids, 64));
    maskable += 48;
  }
  ASSERT_GE(maskable, 10000u);
  std::size_t masked = 0;
  for (const auto& ps : sample_mlm_positions(batch, 0.15, 1234)) masked += ps.size();
  const double rate = static_cast<double>(masked) / static_cast<double>(maskable);
  EXPECT_GE(rate, 0.14);
  EXPECT_LE(rate, 0.16);
}

TEST(Mlm, NeverMasksSpecialMarkers) {
  std::vector<TokenizedInput> batch = {input_of({2, 1, 5, 3}, 8), input_of({2, 6, 3}, 8)};
  for (std::uint64_t s = 0; s < 200; ++s)
    for (std::size_t b = 0; b < batch.size(); ++b) {
      auto pos = sample_mlm_positions(batch, 0.5, s)[b];
      EXPECT_FALSE(pos.empty());
      for (auto i : pos) {
        EXPECT_NE(batch[b].input_ids[i], special::kCls);
        EXPECT_NE(batch[b].input_ids[i], special::kSep);
        EXPECT_NE(batch[b].input_ids[i], special::kPad);
      }
    }
  EXPECT_THROW(sample_mlm_positions(std::vector<TokenizedInput>{input_of({2, 3}, 8)}, 0.15, 0), InputError);
  EXPECT_THROW(sample_mlm_positions(batch, 1.5, 0), InputError);
}

TEST(Mlm, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u}) {
    Parameters p = oracle::random_params(tiny(), seed);
    auto batch = two_sequences(8);
    auto positions = sample_mlm_positions(batch, 0.4, seed);
    auto r = mlm_loss_at(p, batch, positions);
    auto check = oracle::finite_difference_check(
        p, r.grad, [&](const Parameters& q) { return mlm_loss_at(q, batch, positions).loss; });
    EXPECT_LT(check.worst, 1e-4) << check.where;
  }
}

TEST(Orders, LengthOneIsIdentity) {
  for (const auto& z : sample_factorization_orders(1, 10, 3)) EXPECT_EQ(z, FactorizationOrder::identity(1));
}

TEST(Orders, UniformOverPermutationsOfThree) {
  std::map<std::vector<std::size_t>, int> freq;
  const int n = 60000;
  for (const auto& z : sample_factorization_orders(3, n, 42)) freq[z.perm]++;
  ASSERT_EQ(freq.size(), 6u);
  for (const auto& [perm, k] : freq) EXPECT_NEAR(static_cast<double>(k) / n, 1.0 / 6.0, 0.02);
}

TEST(Orders, SeedReproduces) {
  EXPECT_EQ(sample_factorization_orders(7, 5, 9)[4], sample_factorization_orders(7, 5, 9)[4]);
}

TEST(Plm, PredictedCount) {
  EXPECT_EQ(predicted_count(6, 1.0), 6u);
  EXPECT_EQ(predicted_count(6, 0.5), 3u);
  EXPECT_EQ(predicted_count(6, 1.0 / 6.0), 1u);
  EXPECT_EQ(predicted_count(7, 0.3), 3u);
  EXPECT_THROW(predicted_count(6, 0.0), InputError);
  EXPECT_THROW(predicted_count(6, 1.1), InputError);
}

TEST(Plm, UniformLogitsGiveLogV) {
  Parameters p = oracle::random_params(tiny(), 4);
  p.token_embedding.setZero();
  auto batch = two_sequences(8);
  std::vector<std::vector<FactorizationOrder>> orders = {sample_factorization_orders(6, 2, 1),
                                                         sample_factorization_orders(4, 2, 2)};
  EXPECT_NEAR(plm_loss(p, batch, orders, 0.5).loss, std::log(11.0), 1e-12);
}

TEST(Plm, IdentityOrderIsAutoregressive) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Parameters p = oracle::random_params(tiny(), seed);
    std::vector<TokenId> ids = {2, 5, 9, 6, 1, 3};
    std::vector<TokenizedInput> batch = {input_of(ids, 8)};
    const double plm = plm_loss(p, batch, {{FactorizationOrder::identity(ids.size())}}, 1.0).loss;
    const double ar = oracle::autoregressive_loss(p, std::vector<int>(ids.begin(), ids.end()));
    EXPECT_NEAR(plm, ar, 1e-10);
  }
}

TEST(Plm, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed : {3u, 4u}) {
    Parameters p = oracle::random_params(tiny(), seed);
    auto batch = two_sequences(8);
    std::vector<std::vector<FactorizationOrder>> orders = {sample_factorization_orders(6, 2, seed),
                                                           sample_factorization_orders(4, 1, seed + 1)};
    auto r = plm_loss(p, batch, orders, 0.5);
    auto check = oracle::finite_difference_check(
        p, r.grad, [&](const Parameters& q) { return plm_loss(q, batch, orders, 0.5).loss; });
    EXPECT_LT(check.worst, 1e-4) << check.where;
  }
}

TEST(Classify, BceGradientsMatchFiniteDifferences) {
  for (Pooling pool : {Pooling::first_token, Pooling::last_token, Pooling::mean}) {
    ModelConfig c = tiny();
    c.pooling = pool;
    Parameters p = oracle::random_params(c, 5);
    auto batch = two_sequences(8);
    std::vector<LabelVector> targets = {{1, 0, 1}, {0, 1, 0}};
    auto loss_of = [&](const Parameters& q, Parameters* grad) {
      Matrix probs(2, 3);
      std::vector<ClassifyOutput> fwd;
      for (std::size_t i = 0; i < 2; ++i) {
        fwd.push_back(classify_forward(q, batch[i]));
        probs.row(static_cast<Eigen::Index>(i)) = fwd.back().probs;
      }
      BceResult b = bce_loss(probs, targets);
      if (grad)
        for (std::size_t i = 0; i < 2; ++i)
          classify_backward(q, fwd[i], b.grad.row(static_cast<Eigen::Index>(i)), *grad);
      return b.loss;
    };
    Parameters g = zeros_like(p);
    loss_of(p, &g);
    auto check = oracle::finite_difference_check(p, g, [&](const Parameters& q) { return loss_of(q, nullptr); });
    EXPECT_LT(check.worst, 1e-4) << check.where << " pooling " << to_string(pool);
  }
}
