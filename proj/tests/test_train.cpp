#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "mltc/train/loss.hpp"
#include "mltc/train/optimizer.hpp"
#include "mltc/train/trainer.hpp"
#include "oracles.hpp"

using namespace mltc;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.d_ff = 8;
  c.vocab_size = 9;
  c.max_len = 6;
  c.num_labels = 2;
  return c;
}

double naive_bce(const Matrix& p, const std::vector<LabelVector>& y) {
  double s = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      double q = std::min(std::max(p(i, j), 1e-7), 1 - 1e-7);
      s += y[i][j] ? -std::log(q) : -std::log(1 - q);
    }
  return s / static_cast<double>(p.size());
}

}  // namespace

TEST(Bce, PerfectPredictionNearZero) {
  Matrix p(1, 3);
  p << 1.0, 0.0, 1.0;
  EXPECT_LT(bce_loss(p, std::vector<LabelVector>{{1, 0, 1}}).loss, 1e-6);
}

TEST(Bce, HalfEverywhereIsLogTwo) {
  Matrix p = Matrix::Constant(4, 5, 0.5);
  std::vector<LabelVector> y(4, LabelVector{1, 0, 1, 0, 0});
  EXPECT_NEAR(bce_loss(p, y).loss, std::log(2.0), 1e-15);
}

TEST(Bce, MatchesScalarLoop) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    Matrix p(7, 5);
    std::vector<LabelVector> y(7, LabelVector(5));
    for (Eigen::Index i = 0; i < 7; ++i)
      for (Eigen::Index j = 0; j < 5; ++j) {
        p(i, j) = t % 5 == 0 && j == 0 ? 0.0 : u(rng);
        y[i][j] = rng() & 1;
      }
    EXPECT_NEAR(bce_loss(p, y).loss, naive_bce(p, y), 1e-12);
  }
  EXPECT_THROW(bce_loss(Matrix::Constant(2, 2, 0.5), std::vector<LabelVector>{{1, 0}}), InputError);
}

TEST(AdamW, ZeroGradientWithoutDecayIsFixedPoint) {
  Parameters p = oracle::random_params(small_config(), 1);
  Parameters before = p;
  OptimizerState s = init_optimizer_state(p);
  AdamWConfig cfg;
  cfg.weight_decay = 0;
  adamw_step(p, zeros_like(p), s, cfg);
  EXPECT_TRUE(p == before);
  EXPECT_EQ(s.step, 1u);
}

TEST(AdamW, ZeroGradientDecaysOnly) {
  Parameters p = oracle::random_params(small_config(), 2);
  Parameters before = p;
  OptimizerState s = init_optimizer_state(p);
  AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.3;
  adamw_step(p, zeros_like(p), s, cfg);
  std::vector<Matrix> old;
  before.visit([&](const std::string&, const Matrix& m) { old.push_back(m); });
  std::size_t i = 0;
  p.visit([&](const std::string& name, const Matrix& m) {
    EXPECT_TRUE(m.isApprox(old[i++] * (1 - 0.1 * 0.3), 1e-15)) << name;
  });
}

TEST(AdamW, FirstStepByHand) {
  Parameters p = oracle::random_params(small_config(), 3);
  Parameters g = zeros_like(p);
  g.head_bias(0, 0) = 1.0;
  const double theta0 = p.head_bias(0, 0);
  OptimizerState s = init_optimizer_state(p);
  AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.epsilon = 1e-8;
  cfg.weight_decay = 0.01;
  adamw_step(p, g, s, cfg);
  // m = 0.1, v = 0.001; bias-corrected both are 1.
  const double expected = theta0 - 0.1 * 0.01 * theta0 - 0.1 * 1.0 / (std::sqrt(1.0) + 1e-8);
  EXPECT_NEAR(p.head_bias(0, 0), expected, 1e-15);
  EXPECT_NEAR(s.first_moment.head_bias(0, 0), 0.1, 1e-15);
  EXPECT_NEAR(s.second_moment.head_bias(0, 0), 0.001, 1e-15);
}

TEST(AdamW, NonFiniteGradientIsNumericError) {
  Parameters p = oracle::random_params(small_config(), 4);
  Parameters g = zeros_like(p);
  g.layers[0].w_query(0, 0) = std::nan("");
  OptimizerState s = init_optimizer_state(p);
  EXPECT_THROW(adamw_step(p, g, s, AdamWConfig{}), NumericError);
}

TEST(TrainConfigDefaults, MatchPublishedSetup) {
  TrainConfig t;
  EXPECT_EQ(t.epochs, 40u);
  EXPECT_EQ(t.batch_size, 48u);
  EXPECT_EQ(t.max_len, 512u);
  EXPECT_DOUBLE_EQ(t.mask_rate, 0.15);
  EXPECT_EQ(default_grid_learning_rates(), (std::vector<double>{1e-4, 2e-4, 3e-4, 4e-4, 5e-4}));
  EXPECT_EQ(default_grid_max_lens(), (std::vector<std::size_t>{484, 512}));
}

TEST(Fit, DeterministicAndOneEpochTrace) {
  TrainingFixture f = overfit_fixture();
  std::vector<Example> train(f.examples.begin(), f.examples.begin() + 48), test(f.examples.begin() + 48, f.examples.end());
  TrainConfig t = overfit_train_config();
  t.epochs = 2;
  FitResult a = fit(train, test, f.model, t), b = fit(train, test, f.model, t);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_TRUE(a.best == b.best);
  t.epochs = 1;
  EXPECT_EQ(fit(train, test, f.model, t).trace.size(), 1u);
}

TEST(Fit, ZeroLearningRateFreezes) {
  TrainingFixture f = overfit_fixture();
  std::vector<Example> train(f.examples.begin(), f.examples.begin() + 48), test(f.examples.begin() + 48, f.examples.end());
  TrainConfig t = overfit_train_config();
  t.optimizer.learning_rate = 0;
  t.optimizer.weight_decay = 0;
  t.epochs = 3;
  Parameters init = init_params(f.model, 5);
  FitResult r = fit(train, test, f.model, t, &init);
  EXPECT_TRUE(r.best == init);
  EXPECT_EQ(r.trace[0].test_loss, r.trace[2].test_loss);
  EXPECT_NEAR(r.trace[0].train_loss, r.trace[2].train_loss, 1e-12);
}

TEST(Fit, OverfitsSixtyFourExamples) {
  TrainingFixture f = overfit_fixture();
  TrainConfig t = overfit_train_config();
  Parameters p = init_params(f.model, 11);
  OptimizerState s = init_optimizer_state(p);
  std::vector<double> losses;
  MetricsReport m;
  for (std::size_t e = 0; e < 300; ++e) {
    train_epoch(p, s, f.examples, t, e);
    m = evaluate(p, f.examples, f.labels);
    losses.push_back(m.bce_loss);
    if (m.binary_accuracy >= 0.99 && m.bce_loss <= 0.05) break;
  }
  EXPECT_GE(m.binary_accuracy, 0.99);
  EXPECT_LE(m.bce_loss, 0.05);
  std::size_t down = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) down += losses[i] < losses[i - 1];
  EXPECT_GE(static_cast<double>(down), 0.8 * static_cast<double>(losses.size() - 1));
}

TEST(Grid, OneCellEqualsDirectFit) {
  TrainingFixture f = overfit_fixture();
  auto [train_d, test_d] = split_dataset(f.dataset, {0.75, 1});
  TrainConfig t = overfit_train_config();
  t.epochs = 2;
  auto rows = grid_search(make_grid(t, {1e-3}, {32}), f.model, GridData{train_d, test_d, f.tokens, f.labels});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].best);
  auto train = make_examples(train_d, f.tokens, f.labels, 32), test = make_examples(test_d, f.tokens, f.labels, 32);
  MetricsReport direct = evaluate(fit(train, test, f.model, t).best, test, f.labels);
  EXPECT_EQ(rows[0].accuracy, direct.binary_accuracy);
  EXPECT_EQ(rows[0].micro_f1, direct.micro_f1);
  EXPECT_EQ(rows[0].macro_f1, direct.macro_f1);
}

TEST(Grid, BestFlagIsArgmaxWithLowerRateOnTies) {
  std::vector<GridRow> rows(5);
  const double lr[] = {3e-4, 1e-4, 2e-4, 5e-4, 4e-4};
  const double acc[] = {0.90, 0.95, 0.95, 0.97, 0.97};
  for (int i = 0; i < 5; ++i) {
    rows[i].learning_rate = lr[i];
    rows[i].accuracy = acc[i];
  }
  EXPECT_EQ(best_grid_row(rows), 4u);
  rows[4].error = "boom";
  EXPECT_EQ(best_grid_row(rows), 3u);
  // scan of the table: highest accuracy, then lowest rate
  rows[3].accuracy = 0.95;
  std::size_t scan = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].error.empty()) continue;
    if (rows[i].accuracy > rows[scan].accuracy ||
        (rows[i].accuracy == rows[scan].accuracy && rows[i].learning_rate < rows[scan].learning_rate))
      scan = i;
  }
  EXPECT_EQ(best_grid_row(rows), scan);
  EXPECT_EQ(scan, 1u);
}

TEST(Grid, FailingCellIsRecorded) {
  TrainingFixture f = overfit_fixture();
  auto [train_d, test_d] = split_dataset(f.dataset, {0.75, 1});
  TrainConfig t = overfit_train_config();
  t.epochs = 1;
  auto rows = grid_search(make_grid(t, {1e-3}, {2, 32}), f.model, GridData{train_d, test_d, f.tokens, f.labels});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_TRUE(rows[1].best);
}
