#pragma once

// Fine-tuning (sigmoid head + BCE), masked/permutation pretraining loops,
// epoch traces and the learning-rate x max-length grid.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mltc/corpus.hpp"
#include "mltc/error.hpp"
#include "mltc/labelprep.hpp"
#include "mltc/metrics.hpp"
#include "mltc/model/objectives.hpp"
#include "mltc/tokenizer.hpp"
#include "mltc/train/loss.hpp"
#include "mltc/train/optimizer.hpp"

namespace mltc {

enum class Objective { mlm_pretrain, plm_pretrain, finetune };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::mlm_pretrain: return "mlm_pretrain";
    case Objective::plm_pretrain: return "plm_pretrain";
    case Objective::finetune: return "finetune";
  }
  return "finetune";
}

inline Objective parse_objective(const std::string& s) {
  if (s == "mlm_pretrain") return Objective::mlm_pretrain;
  if (s == "plm_pretrain") return Objective::plm_pretrain;
  if (s == "finetune") return Objective::finetune;
  throw InputError("unknown objective '" + s + "' (expected mlm_pretrain, plm_pretrain or finetune)");
}

struct TrainConfig {
  AdamWConfig optimizer;
  std::size_t batch_size = 48;
  std::size_t epochs = 40;
  std::size_t max_len = 512;
  std::uint64_t seed = 0;
  Objective objective = Objective::finetune;
  double mask_rate = 0.15;
  double predict_fraction = 1.0;
  std::size_t orders_per_example = 1;
  bool identity_orders = false;  // debug: PLM with the left-to-right order only

  void validate() const {
    optimizer.validate();
    require(optimizer.learning_rate >= 0.0, "learning_rate must be >= 0");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(epochs >= 1, "epochs must be >= 1");
    require(max_len >= 3, "max_len must be >= 3");
    require(orders_per_example >= 1, "orders_per_example must be >= 1");
  }
};

struct EpochStats {
  double train_loss = 0;
  double train_accuracy = 0;
  double test_loss = 0;
  double test_accuracy = 0;

  bool operator==(const EpochStats&) const = default;
};

using EpochTrace = std::vector<EpochStats>;

/// splitmix64 over the inputs; derives independent per-epoch/per-batch seeds.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  auto step = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return step(step(step(base) ^ a) ^ b);
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i-- > 1;) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  return idx;
}

inline std::vector<Example> make_examples(const Dataset& d, const Vocab& tokens, const LabelVocabulary& labels,
                                          std::size_t max_len) {
  std::vector<Example> out;
  out.reserve(d.size());
  for (const auto& r : d.records) {
    std::set<std::string> known;
    for (const auto& l : r.labels)
      if (labels.contains(l)) known.insert(l);
    out.push_back(Example{encode_text(r.text, tokens, max_len), encode_labels(known, labels)});
  }
  return out;
}

inline void add_into(Parameters& acc, const Parameters& g) {
  std::vector<const Matrix*> src;
  g.visit([&](const std::string&, const Matrix& m) { src.push_back(&m); });
  std::size_t i = 0;
  acc.visit([&](const std::string&, Matrix& m) { m += *src[i++]; });
}

struct BatchResult {
  double loss = 0;
  ConfusionCounts counts;
};

/// Loss, counts and gradient of the slot-averaged BCE for one batch.
inline BatchResult finetune_batch(const Parameters& p, std::span<const Example> batch, Parameters& grad) {
  const auto labels = static_cast<Eigen::Index>(p.config.num_labels);
  std::vector<ClassifyOutput> fwd;
  fwd.reserve(batch.size());
  Matrix probs(static_cast<Eigen::Index>(batch.size()), labels);
  std::vector<LabelVector> targets, preds;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    fwd.push_back(classify_forward(p, batch[i].input));
    probs.row(static_cast<Eigen::Index>(i)) = fwd.back().probs.row(0);
    targets.push_back(batch[i].target);
    std::vector<double> row(fwd.back().probs.data(), fwd.back().probs.data() + labels);
    preds.push_back(threshold_probs(row, 0.5));
  }
  BceResult bce = bce_loss(probs, targets);
  for (std::size_t i = 0; i < batch.size(); ++i)
    classify_backward(p, fwd[i], bce.grad.row(static_cast<Eigen::Index>(i)), grad);
  return {bce.loss, confusion(preds, targets)};
}

/// One pass over data in a seed- and epoch-determined order. Returns train
/// loss and binary accuracy accumulated from each batch before its update.
inline EpochStats train_epoch(Parameters& p, OptimizerState& s, std::span<const Example> data, const TrainConfig& cfg,
                              std::size_t epoch) {
  if (data.empty()) throw InputError("train_epoch: empty training data");
  const auto order = shuffled_indices(data.size(), mix_seed(cfg.seed, 0x5eed, epoch));
  double loss_sum = 0;
  Counts agg;
  std::vector<Example> batch;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) batch.push_back(data[order[i]]);
    Parameters grad = zeros_like(p);
    BatchResult br = finetune_batch(p, batch, grad);
    if (!std::isfinite(br.loss)) throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    adamw_step(p, grad, s, cfg.optimizer);
    loss_sum += br.loss * static_cast<double>(batch.size());
    agg.tp += br.counts.aggregate.tp;
    agg.fp += br.counts.aggregate.fp;
    agg.tn += br.counts.aggregate.tn;
    agg.fn += br.counts.aggregate.fn;
  }
  EpochStats st;
  st.train_loss = loss_sum / static_cast<double>(data.size());
  st.train_accuracy = static_cast<double>(agg.tp + agg.tn) / static_cast<double>(agg.total());
  return st;
}

struct FitResult {
  Parameters best;
  EpochTrace trace;
  std::size_t best_epoch = 0;  // 1-based
  OptimizerState optimizer;    // state after the final epoch
};

/// Trains for cfg.epochs, scoring the test split after each epoch; keeps the
/// parameters with the highest test binary accuracy (earliest on ties).
inline FitResult fit(std::span<const Example> train, std::span<const Example> test, const ModelConfig& model_cfg,
                     const TrainConfig& cfg, const Parameters* init = nullptr) {
  cfg.validate();
  if (train.empty() || test.empty()) throw InputError("fit needs non-empty train and test data");
  FitResult r;
  Parameters p = init ? *init : init_params(model_cfg, mix_seed(cfg.seed, 0x1417));
  if (init && !(init->config == model_cfg)) throw InputError("initial parameters do not match the model config");
  OptimizerState s = init_optimizer_state(p);
  double best_acc = -1;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochStats st = train_epoch(p, s, train, cfg, e);
    std::vector<LabelVector> preds, targets;
    Matrix probs(static_cast<Eigen::Index>(test.size()), static_cast<Eigen::Index>(model_cfg.num_labels));
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto pr = classify(p, test[i].input);
      for (std::size_t j = 0; j < pr.size(); ++j) probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pr[j];
      preds.push_back(threshold_probs(pr, 0.5));
      targets.push_back(test[i].target);
    }
    st.test_loss = bce_loss(probs, targets).loss;
    st.test_accuracy = binary_accuracy(confusion(preds, targets));
    if (!std::isfinite(st.test_loss)) throw NumericError("non-finite test loss at epoch " + std::to_string(e + 1));
    r.trace.push_back(st);
    if (st.test_accuracy > best_acc) {
      best_acc = st.test_accuracy;
      r.best = p;
      r.best_epoch = e + 1;
    }
  }
  r.optimizer = std::move(s);
  return r;
}

// ---- pretraining -------------------------------------------------------------

/// Sequences usable by the masked objective (at least one maskable token).
inline std::vector<TokenizedInput> maskable_only(std::span<const TokenizedInput> inputs) {
  std::vector<TokenizedInput> out;
  for (const auto& in : inputs)
    if (!maskable_positions(in).empty()) out.push_back(in);
  return out;
}

/// Orders used for sequence `index` of batch `batch` in epoch `epoch`.
inline std::vector<FactorizationOrder> orders_for(const TokenizedInput& in, const TrainConfig& cfg, std::size_t epoch,
                                                  std::size_t index) {
  if (cfg.identity_orders) return {FactorizationOrder::identity(in.true_length)};
  return sample_factorization_orders(in.true_length, cfg.orders_per_example, mix_seed(cfg.seed, epoch + 1, index));
}

/// One pretraining epoch with the masked or permutation objective; returns the
/// example-weighted mean batch loss.
inline double pretrain_epoch(Parameters& p, OptimizerState& s, std::span<const TokenizedInput> inputs,
                             const TrainConfig& cfg, std::size_t epoch) {
  if (inputs.empty()) throw InputError("pretrain: no usable sequences");
  if (cfg.objective == Objective::finetune) throw InputError("pretrain_epoch needs a pretraining objective");
  const auto order = shuffled_indices(inputs.size(), mix_seed(cfg.seed, 0x9e7, epoch));
  double loss_sum = 0;
  std::vector<TokenizedInput> batch;
  for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batch_size, ++b) {
    batch.clear();
    std::vector<std::vector<FactorizationOrder>> orders;
    for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
      batch.push_back(inputs[order[i]]);
      if (cfg.objective == Objective::plm_pretrain) orders.push_back(orders_for(batch.back(), cfg, epoch, order[i]));
    }
    LossAndGrad lg = cfg.objective == Objective::mlm_pretrain
                         ? mlm_loss(p, batch, cfg.mask_rate, mix_seed(cfg.seed, epoch + 1, b))
                         : plm_loss(p, batch, orders, cfg.predict_fraction);
    if (!std::isfinite(lg.loss)) throw NumericError("non-finite pretraining loss at epoch " + std::to_string(epoch + 1));
    adamw_step(p, lg.grad, s, cfg.optimizer);
    loss_sum += lg.loss * static_cast<double>(batch.size());
  }
  return loss_sum / static_cast<double>(inputs.size());
}

// ---- grid search ---------------------------------------------------------------

struct GridData {
  const Dataset& train;
  const Dataset& test;
  const Vocab& tokens;
  const LabelVocabulary& labels;
};

struct GridRow {
  double learning_rate = 0;
  std::size_t max_len = 0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double macro_f1 = std::numeric_limits<double>::quiet_NaN();
  double micro_f1 = std::numeric_limits<double>::quiet_NaN();
  bool best = false;
  std::string error;  // non-empty when the cell failed
};

inline std::vector<double> default_grid_learning_rates() { return {1e-4, 2e-4, 3e-4, 4e-4, 5e-4}; }
inline std::vector<std::size_t> default_grid_max_lens() { return {484, 512}; }

inline std::vector<TrainConfig> make_grid(const TrainConfig& base, const std::vector<double>& lrs,
                                          const std::vector<std::size_t>& max_lens) {
  std::vector<TrainConfig> grid;
  for (double lr : lrs)
    for (std::size_t ml : max_lens) {
      TrainConfig c = base;
      c.optimizer.learning_rate = lr;
      c.max_len = ml;
      grid.push_back(c);
    }
  return grid;
}

/// Index of the best row: highest accuracy, ties to the lower learning rate,
/// then to the earlier row. Failed cells never win.
inline std::optional<std::size_t> best_grid_row(const std::vector<GridRow>& rows) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].error.empty() || std::isnan(rows[i].accuracy)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const GridRow& b = rows[*best];
    if (rows[i].accuracy > b.accuracy || (rows[i].accuracy == b.accuracy && rows[i].learning_rate < b.learning_rate))
      best = i;
  }
  return best;
}

/// One fit per cell; a failing cell records its error and the sweep goes on.
inline std::vector<GridRow> grid_search(const std::vector<TrainConfig>& grid, ModelConfig model_cfg,
                                        const GridData& data, double decision_threshold = 0.5) {
  if (grid.empty()) throw InputError("grid_search: empty grid");
  std::vector<GridRow> rows;
  for (const TrainConfig& cell : grid) {
    GridRow row;
    row.learning_rate = cell.optimizer.learning_rate;
    row.max_len = cell.max_len;
    try {
      model_cfg.max_len = cell.max_len;
      auto train = make_examples(data.train, data.tokens, data.labels, cell.max_len);
      auto test = make_examples(data.test, data.tokens, data.labels, cell.max_len);
      FitResult fr = fit(train, test, model_cfg, cell);
      MetricsReport m = evaluate(fr.best, test, data.labels, decision_threshold);
      row.accuracy = m.binary_accuracy;
      row.macro_f1 = m.macro_f1;
      row.micro_f1 = m.micro_f1;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  if (auto b = best_grid_row(rows)) rows[*b].best = true;
  return rows;
}

}  // namespace mltc
