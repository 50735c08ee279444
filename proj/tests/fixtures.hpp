#pragma once

// Small synthetic training sets shared by the unit and acceptance tests.

#include "mltc/labelprep.hpp"
#include "mltc/metrics.hpp"
#include "mltc/synthetic.hpp"
#include "mltc/textprep.hpp"
#include "mltc/tokenizer.hpp"
#include "mltc/train/trainer.hpp"

struct TrainingFixture {
  mltc::Dataset dataset;
  mltc::LabelVocabulary labels;
  mltc::Vocab tokens;
  mltc::ModelConfig model;
  std::vector<mltc::Example> examples;
};

/// 64 examples over 8 labels, max_len 32, d_model 32 / 2 layers / 2 heads.
inline TrainingFixture overfit_fixture() {
  mltc::SyntheticSpec spec;
  spec.records = 64;
  spec.labels = 8;
  spec.zipf_exponent = 0.5;
  spec.min_words = 12;
  spec.max_words = 28;
  spec.seed = 7;
  TrainingFixture f;
  f.dataset = mltc::make_synthetic_corpus(spec);
  for (auto& r : f.dataset.records) r.text = mltc::preprocess(r.text, {});
  f.labels = mltc::select_top_labels(mltc::count_labels(f.dataset), 8);
  std::vector<std::string> texts;
  for (const auto& r : f.dataset.records) texts.push_back(r.text);
  f.tokens = mltc::build_vocab(texts, 10000, 1);
  f.model.d_model = 32;
  f.model.n_heads = 2;
  f.model.n_layers = 2;
  f.model.d_ff = 64;
  f.model.max_len = 32;
  f.model.vocab_size = f.tokens.size();
  f.model.num_labels = f.labels.size();
  f.examples = mltc::make_examples(f.dataset, f.tokens, f.labels, f.model.max_len);
  return f;
}

inline mltc::TrainConfig overfit_train_config() {
  mltc::TrainConfig t;
  t.optimizer.learning_rate = 1e-3;
  t.batch_size = 16;
  t.max_len = 32;
  t.seed = 3;
  return t;
}
