#pragma once

// Config-driven experiment commands: prepare, pretrain, train, evaluate, sweep,
// report. Every command writes resolved_config.json into its output directory;
// re-running a command with that file reproduces its numeric outputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mltc/checkpoint.hpp"
#include "mltc/corpus.hpp"
#include "mltc/error.hpp"
#include "mltc/labelprep.hpp"
#include "mltc/metrics.hpp"
#include "mltc/model/config.hpp"
#include "mltc/textprep.hpp"
#include "mltc/tokenizer.hpp"
#include "mltc/train/trainer.hpp"

namespace mltc {

namespace fs = std::filesystem;
using nlohmann::json;

struct ExperimentConfig {
  std::uint64_t seed = 13;
  std::string out = "runs/default";

  // data
  std::string raw;           // raw dataset for prepare
  std::string format;        // "jsonl" | "csv" | "" (from extension)
  std::string prepared_dir;  // where prepare wrote its files; "" means out
  double train_fraction = 0.8;
  std::string export_dataset;  // optional extra copy of the filtered dataset
  std::string export_vocab;    // optional extra copy of the token vocabulary

  PreprocessConfig preprocess;
  std::size_t label_threshold = kDefaultLabelThreshold;
  std::size_t label_top_k = 0;  // > 0 keeps the k most frequent labels instead

  std::size_t max_vocab = 30000;
  std::size_t min_freq = 1;
  std::size_t max_len = 512;

  ModelConfig model;
  TrainConfig pretrain;
  std::string pretrain_resume;  // checkpoint to continue from
  TrainConfig train;
  std::string init_checkpoint;  // optional starting weights for train

  double decision_threshold = 0.5;
  std::string eval_checkpoint;  // "" means <out>/model.ckpt

  std::vector<double> sweep_learning_rates = default_grid_learning_rates();
  std::vector<std::size_t> sweep_max_lens = default_grid_max_lens();

  std::optional<double> report_sigma;

  fs::path out_dir() const { return out; }
  fs::path data_dir() const { return prepared_dir.empty() ? fs::path(out) : fs::path(prepared_dir); }
};

namespace detail {

inline void check_keys(const json& section, const std::string& name, std::initializer_list<const char*> allowed) {
  if (!section.is_object()) throw InputError("config section '" + name + "' must be an object");
  for (const auto& [key, _] : section.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= key == a;
    if (!ok) throw InputError("unknown config key '" + (name.empty() ? key : name + "." + key) + "'");
  }
}

inline json section_of(const json& j, const char* name) {
  return j.contains(name) ? j.at(name) : json::object();
}

inline void read_train(const json& j, const std::string& name, TrainConfig& t) {
  check_keys(j, name,
             {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "batch_size", "epochs", "objective",
              "mask_rate", "predict_fraction", "orders_per_example", "identity_orders", "resume", "init_checkpoint"});
  t.optimizer.learning_rate = j.value("learning_rate", t.optimizer.learning_rate);
  t.optimizer.beta1 = j.value("beta1", t.optimizer.beta1);
  t.optimizer.beta2 = j.value("beta2", t.optimizer.beta2);
  t.optimizer.epsilon = j.value("epsilon", t.optimizer.epsilon);
  t.optimizer.weight_decay = j.value("weight_decay", t.optimizer.weight_decay);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.epochs = j.value("epochs", t.epochs);
  if (j.contains("objective")) t.objective = parse_objective(j.at("objective").get<std::string>());
  t.mask_rate = j.value("mask_rate", t.mask_rate);
  t.predict_fraction = j.value("predict_fraction", t.predict_fraction);
  t.orders_per_example = j.value("orders_per_example", t.orders_per_example);
  t.identity_orders = j.value("identity_orders", t.identity_orders);
}

inline json write_train(const TrainConfig& t) {
  return {{"learning_rate", t.optimizer.learning_rate},
          {"beta1", t.optimizer.beta1},
          {"beta2", t.optimizer.beta2},
          {"epsilon", t.optimizer.epsilon},
          {"weight_decay", t.optimizer.weight_decay},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"objective", to_string(t.objective)},
          {"mask_rate", t.mask_rate},
          {"predict_fraction", t.predict_fraction},
          {"orders_per_example", t.orders_per_example},
          {"identity_orders", t.identity_orders}};
}

}  // namespace detail

/// Builds a config from (possibly partial) json; missing keys keep defaults,
/// unknown keys are rejected.
inline ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.pretrain.objective = Objective::mlm_pretrain;
    c.pretrain.epochs = 1;
    detail::check_keys(j, "", {"seed", "out", "data", "preprocess", "labels", "tokenizer", "model", "pretrain", "train",
                               "evaluate", "sweep", "report"});
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);

    const json data = detail::section_of(j, "data");
    detail::check_keys(data, "data", {"raw", "format", "prepared_dir", "train_fraction", "export_dataset"});
    c.raw = data.value("raw", c.raw);
    c.format = data.value("format", c.format);
    c.prepared_dir = data.value("prepared_dir", c.prepared_dir);
    c.train_fraction = data.value("train_fraction", c.train_fraction);
    c.export_dataset = data.value("export_dataset", c.export_dataset);

    const json pre = detail::section_of(j, "preprocess");
    detail::check_keys(pre, "preprocess", {"remove_special", "remove_stopwords", "lemmatize", "lowercase", "stopword_list"});
    c.preprocess.remove_special = pre.value("remove_special", c.preprocess.remove_special);
    c.preprocess.remove_stopwords = pre.value("remove_stopwords", c.preprocess.remove_stopwords);
    c.preprocess.lemmatize = pre.value("lemmatize", c.preprocess.lemmatize);
    c.preprocess.lowercase = pre.value("lowercase", c.preprocess.lowercase);
    c.preprocess.stopword_list_id = pre.value("stopword_list", c.preprocess.stopword_list_id);

    const json labels = detail::section_of(j, "labels");
    detail::check_keys(labels, "labels", {"threshold", "top_k"});
    c.label_threshold = labels.value("threshold", c.label_threshold);
    c.label_top_k = labels.value("top_k", c.label_top_k);

    const json tok = detail::section_of(j, "tokenizer");
    detail::check_keys(tok, "tokenizer", {"max_vocab", "min_freq", "max_len", "export_vocab"});
    c.max_vocab = tok.value("max_vocab", c.max_vocab);
    c.min_freq = tok.value("min_freq", c.min_freq);
    c.max_len = tok.value("max_len", c.max_len);
    c.export_vocab = tok.value("export_vocab", c.export_vocab);

    const json pt = detail::section_of(j, "pretrain");
    detail::read_train(pt, "pretrain", c.pretrain);
    c.pretrain_resume = pt.value("resume", c.pretrain_resume);
    const json tr = detail::section_of(j, "train");
    detail::read_train(tr, "train", c.train);
    c.init_checkpoint = tr.value("init_checkpoint", c.init_checkpoint);

    const json model = detail::section_of(j, "model");
    detail::check_keys(model, "model", {"d_model", "n_heads", "n_layers", "d_ff", "pooling"});
    // Permutation-pretrained encoders summarize at the last position, masked ones at [CLS].
    c.model.pooling = c.pretrain.objective == Objective::plm_pretrain ? Pooling::last_token : Pooling::first_token;
    from_json(model, c.model);

    const json ev = detail::section_of(j, "evaluate");
    detail::check_keys(ev, "evaluate", {"decision_threshold", "checkpoint"});
    c.decision_threshold = ev.value("decision_threshold", c.decision_threshold);
    c.eval_checkpoint = ev.value("checkpoint", c.eval_checkpoint);

    const json sw = detail::section_of(j, "sweep");
    detail::check_keys(sw, "sweep", {"learning_rates", "max_lens"});
    if (sw.contains("learning_rates")) c.sweep_learning_rates = sw.at("learning_rates").get<std::vector<double>>();
    if (sw.contains("max_lens")) c.sweep_max_lens = sw.at("max_lens").get<std::vector<std::size_t>>();

    const json rep = detail::section_of(j, "report");
    detail::check_keys(rep, "report", {"sigma"});
    if (rep.contains("sigma") && !rep.at("sigma").is_null()) c.report_sigma = rep.at("sigma").get<double>();

    if (c.out.empty()) throw InputError("config 'out' must name an output directory");
    if (!(c.decision_threshold > 0.0 && c.decision_threshold < 1.0))
      throw InputError("evaluate.decision_threshold must lie in (0, 1)");
    if (c.report_sigma && !(*c.report_sigma > 0.0)) throw InputError("report.sigma must be > 0");
    stopword_list(c.preprocess.stopword_list_id);
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad config value: ") + e.what());
  }
}

inline json to_json(const ExperimentConfig& c) {
  json model;
  to_json(model, c.model);
  model.erase("vocab_size");
  model.erase("num_labels");
  model.erase("max_len");
  json pretrain = detail::write_train(c.pretrain);
  pretrain["resume"] = c.pretrain_resume;
  json train = detail::write_train(c.train);
  train["init_checkpoint"] = c.init_checkpoint;
  return {{"seed", c.seed},
          {"out", c.out},
          {"data",
           {{"raw", c.raw},
            {"format", c.format},
            {"prepared_dir", c.prepared_dir},
            {"train_fraction", c.train_fraction},
            {"export_dataset", c.export_dataset}}},
          {"preprocess",
           {{"remove_special", c.preprocess.remove_special},
            {"remove_stopwords", c.preprocess.remove_stopwords},
            {"lemmatize", c.preprocess.lemmatize},
            {"lowercase", c.preprocess.lowercase},
            {"stopword_list", c.preprocess.stopword_list_id}}},
          {"labels", {{"threshold", c.label_threshold}, {"top_k", c.label_top_k}}},
          {"tokenizer",
           {{"max_vocab", c.max_vocab}, {"min_freq", c.min_freq}, {"max_len", c.max_len}, {"export_vocab", c.export_vocab}}},
          {"model", model},
          {"pretrain", pretrain},
          {"train", train},
          {"evaluate", {{"decision_threshold", c.decision_threshold}, {"checkpoint", c.eval_checkpoint}}},
          {"sweep", {{"learning_rates", c.sweep_learning_rates}, {"max_lens", c.sweep_max_lens}}},
          {"report", {{"sigma", c.report_sigma ? json(*c.report_sigma) : json(nullptr)}}}};
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config '" + path.string() + "' is not valid json: " + e.what());
  }
}

/// Applies "a.b.c=value" to j; value is parsed as json, falling back to a string.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InputError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw InputError("override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

// ---- shared helpers ---------------------------------------------------------------

namespace detail {

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void require_file(const fs::path& path, const std::string& hint) {
  if (!fs::is_regular_file(path))
    throw InputError("missing '" + path.string() + "'" + (hint.empty() ? "" : " (" + hint + ")"));
}

inline void start_run(const ExperimentConfig& c) {
  ensure_dir(c.out_dir());
  write_json(c.out_dir() / "resolved_config.json", to_json(c));
}

struct PreparedFiles {
  Dataset train, test;
  Vocab tokens;
  LabelVocabulary labels;
};

inline PreparedFiles load_prepared(const ExperimentConfig& c) {
  const fs::path dir = c.data_dir();
  for (const char* f : {"train.jsonl", "test.jsonl", "vocab.txt", "labels.txt"})
    require_file(dir / f, "run prepare first");
  return {load_dataset(dir / "train.jsonl", Format::jsonl), load_dataset(dir / "test.jsonl", Format::jsonl),
          load_vocab(dir / "vocab.txt"), load_label_vocabulary(dir / "labels.txt")};
}

inline ModelConfig resolved_model(const ExperimentConfig& c, const PreparedFiles& p, std::size_t max_len) {
  ModelConfig m = c.model;
  m.vocab_size = p.tokens.size();
  m.num_labels = p.labels.size();
  m.max_len = max_len;
  m.validate();
  return m;
}

inline TrainConfig resolved_train(const ExperimentConfig& c, TrainConfig t) {
  t.seed = c.seed;
  t.max_len = c.max_len;
  t.validate();
  return t;
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

/// Minimal reader for the numeric csv files this module writes.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path.string() + "' is empty");
  auto header = split_on(line, ',');
  std::vector<std::vector<double>> cols(header.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_on(line, ',');
    if (cells.size() != header.size())
      throw InputError("'" + path.string() + "' row " + std::to_string(row) + " has the wrong number of columns");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        cols[i].push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw InputError("'" + path.string() + "' row " + std::to_string(row) + " has a non-numeric cell");
      }
    }
  }
  return {header, cols};
}

inline void write_numeric_csv(const fs::path& path, const std::vector<std::string>& header,
                              const std::vector<std::vector<double>>& cols) {
  std::ostringstream s;
  for (std::size_t i = 0; i < header.size(); ++i) s << (i ? "," : "") << header[i];
  s << '\n';
  const std::size_t rows = cols.empty() ? 0 : cols.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) s << (i ? "," : "") << fmt(cols[i][r]);
    s << '\n';
  }
  write_text(path, s.str());
}

}  // namespace detail

// ---- commands ---------------------------------------------------------------------

struct PrepareReport {
  std::size_t records_in = 0;
  std::size_t records_empty_text = 0;
  std::size_t records_removed = 0;
  std::size_t records_out = 0;
  std::size_t labels_total = 0;
  std::size_t labels_selected = 0;
  std::size_t train_records = 0, test_records = 0, vocab_size = 0;
};

inline PrepareReport cmd_prepare(const ExperimentConfig& c, std::ostream& log) {
  if (c.raw.empty()) throw InputError("no input dataset given (data.raw or --in)");
  if (!fs::exists(c.raw)) throw InputError("input path '" + c.raw + "' does not exist");
  const Format format = c.format.empty() ? format_for_path(c.raw) : parse_format(c.format);
  detail::start_run(c);

  Dataset raw = load_dataset(c.raw, format);
  PrepareReport rep;
  rep.records_in = raw.size();
  Dataset cleaned;
  cleaned.source_meta = raw.source_meta;
  for (auto& r : raw.records) {
    if (c.preprocess.any_enabled()) r.text = preprocess(r.text, c.preprocess);
    if (detail::trim(r.text).empty()) {
      ++rep.records_empty_text;
      continue;
    }
    cleaned.records.push_back(std::move(r));
  }
  if (cleaned.empty()) throw InputError("every record's text is empty after preprocessing");

  const LabelStats stats = count_labels(cleaned);
  const LabelVocabulary vocab =
      c.label_top_k > 0 ? select_top_labels(stats, c.label_top_k) : select_labels(stats, c.label_threshold);
  PreparedDataset prepared = apply_vocabulary(cleaned, vocab);
  rep.records_removed = prepared.removed_records;
  rep.records_out = prepared.dataset.size();
  rep.labels_total = stats.counts.size();
  rep.labels_selected = vocab.size();

  auto [train, test] = split_dataset(prepared.dataset, SplitSpec{c.train_fraction, c.seed});
  std::vector<std::string> texts;
  for (const auto& r : train.records) texts.push_back(r.text);
  const Vocab tokens = build_vocab(texts, c.max_vocab, c.min_freq);
  rep.train_records = train.size();
  rep.test_records = test.size();
  rep.vocab_size = tokens.size();

  const fs::path dir = c.out_dir();
  save_dataset(prepared.dataset, dir / "dataset.jsonl", Format::jsonl);
  save_dataset(train, dir / "train.jsonl", Format::jsonl);
  save_dataset(test, dir / "test.jsonl", Format::jsonl);
  save_label_vocabulary(vocab, dir / "labels.txt");
  save_vocab(tokens, dir / "vocab.txt");
  if (!c.export_dataset.empty()) save_dataset(prepared.dataset, c.export_dataset, format_for_path(c.export_dataset));
  if (!c.export_vocab.empty()) save_vocab(tokens, c.export_vocab);

  json counts = json::object();
  for (const auto& [label, n] : stats.counts) counts[label] = n;
  detail::write_json(dir / "prepare_report.json",
                     {{"records_in", rep.records_in},
                      {"records_empty_after_preprocess", rep.records_empty_text},
                      {"records_removed", rep.records_removed},
                      {"records_out", rep.records_out},
                      {"labels_total", rep.labels_total},
                      {"labels_selected", rep.labels_selected},
                      {"label_threshold", vocab.threshold()},
                      {"selected_labels", vocab.labels()},
                      {"label_counts", counts},
                      {"train_records", rep.train_records},
                      {"test_records", rep.test_records},
                      {"vocab_size", rep.vocab_size}});

  log << "labels: " << rep.labels_total << " -> " << rep.labels_selected << " at threshold " << vocab.threshold()
      << "\n"
      << "records: " << rep.records_in << " read, " << rep.records_removed << " records removed, "
      << rep.records_empty_text << " empty after preprocessing, " << rep.records_out << " kept\n"
      << "split: " << rep.train_records << " train / " << rep.test_records << " test; vocab " << rep.vocab_size
      << " tokens\n";
  return rep;
}

inline std::vector<TokenizedInput> encode_all(const Dataset& d, const Vocab& v, std::size_t max_len) {
  std::vector<TokenizedInput> out;
  out.reserve(d.size());
  for (const auto& r : d.records) out.push_back(encode_text(r.text, v, max_len));
  return out;
}

struct PretrainResult {
  std::vector<double> trace;  // loss per epoch of this run
  std::size_t epochs_done = 0;
  std::uint64_t optimizer_step = 0;
};

inline PretrainResult cmd_pretrain(const ExperimentConfig& c, std::ostream& log) {
  const auto files = detail::load_prepared(c);
  TrainConfig tc = detail::resolved_train(c, c.pretrain);
  if (tc.objective == Objective::finetune) throw InputError("pretrain.objective must be mlm_pretrain or plm_pretrain");
  const ModelConfig mc = detail::resolved_model(c, files, tc.max_len);
  detail::start_run(c);

  Parameters p;
  OptimizerState s;
  std::size_t epochs_done = 0;
  if (!c.pretrain_resume.empty()) {
    detail::require_file(c.pretrain_resume, "pretrain.resume");
    Checkpoint ck = load_checkpoint(c.pretrain_resume);
    if (!(ck.params.config == mc)) throw InputError("resume checkpoint model config does not match this config");
    if (!ck.optimizer) throw InputError("resume checkpoint has no optimizer state");
    p = std::move(ck.params);
    s = std::move(*ck.optimizer);
    epochs_done = ck.meta.value("epochs_done", std::size_t{0});
  } else {
    p = init_params(mc, mix_seed(tc.seed, 0x9e7a));
    s = init_optimizer_state(p);
  }

  auto inputs = encode_all(files.train, files.tokens, tc.max_len);
  if (tc.objective == Objective::mlm_pretrain) inputs = maskable_only(inputs);

  PretrainResult r;
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < tc.epochs; ++e) {
    const std::size_t epoch = epochs_done + e;
    const double loss = pretrain_epoch(p, s, inputs, tc, epoch);
    r.trace.push_back(loss);
    csv << epoch + 1 << ',' << detail::fmt(loss) << '\n';
    log << to_string(tc.objective) << " epoch " << epoch + 1 << " loss " << loss << "\n";
  }
  r.epochs_done = epochs_done + tc.epochs;
  r.optimizer_step = s.step;
  detail::write_text(c.out_dir() / "pretrain_trace.csv", csv.str());
  Checkpoint ck{std::move(p), std::move(s),
                {{"kind", "pretrain"}, {"objective", to_string(tc.objective)}, {"epochs_done", r.epochs_done}}};
  save_checkpoint(ck, c.out_dir() / "pretrain.ckpt");
  return r;
}

inline FitResult cmd_train(const ExperimentConfig& c, std::ostream& log) {
  const auto files = detail::load_prepared(c);
  const TrainConfig tc = detail::resolved_train(c, c.train);
  const ModelConfig mc = detail::resolved_model(c, files, tc.max_len);
  detail::start_run(c);

  std::optional<Parameters> init;
  if (!c.init_checkpoint.empty()) {
    detail::require_file(c.init_checkpoint, "train.init_checkpoint");
    Checkpoint ck = load_checkpoint(c.init_checkpoint);
    if (!(ck.params.config == mc)) throw InputError("init checkpoint model config does not match this config");
    init = std::move(ck.params);
  }
  const auto train = make_examples(files.train, files.tokens, files.labels, tc.max_len);
  const auto test = make_examples(files.test, files.tokens, files.labels, tc.max_len);
  FitResult fr = fit(train, test, mc, tc, init ? &*init : nullptr);

  std::vector<std::vector<double>> cols(5);
  for (std::size_t e = 0; e < fr.trace.size(); ++e) {
    const EpochStats& st = fr.trace[e];
    cols[0].push_back(static_cast<double>(e + 1));
    cols[1].push_back(st.train_loss);
    cols[2].push_back(st.train_accuracy);
    cols[3].push_back(st.test_loss);
    cols[4].push_back(st.test_accuracy);
    log << "epoch " << e + 1 << " train_loss " << st.train_loss << " train_acc " << st.train_accuracy
        << " test_loss " << st.test_loss << " test_acc " << st.test_accuracy << "\n";
  }
  detail::write_numeric_csv(c.out_dir() / "trace.csv",
                            {"epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy"}, cols);
  const EpochStats& best = fr.trace[fr.best_epoch - 1];
  detail::write_json(c.out_dir() / "train_summary.json", {{"epochs", fr.trace.size()},
                                                          {"best_epoch", fr.best_epoch},
                                                          {"best_test_accuracy", best.test_accuracy},
                                                          {"best_test_loss", best.test_loss},
                                                          {"final_train_loss", fr.trace.back().train_loss},
                                                          {"final_train_accuracy", fr.trace.back().train_accuracy}});
  save_checkpoint(Checkpoint{fr.best, std::nullopt, {{"kind", "finetune"}, {"best_epoch", fr.best_epoch}}},
                  c.out_dir() / "model.ckpt");
  log << "best epoch " << fr.best_epoch << " test accuracy " << best.test_accuracy << "\n";
  return fr;
}

inline MetricsReport cmd_evaluate(const ExperimentConfig& c, std::ostream& log) {
  const auto files = detail::load_prepared(c);
  const fs::path ckpt = c.eval_checkpoint.empty() ? c.out_dir() / "model.ckpt" : fs::path(c.eval_checkpoint);
  detail::require_file(ckpt, "run train first");
  detail::start_run(c);
  Checkpoint ck = load_checkpoint(ckpt);
  if (ck.params.config.vocab_size != files.tokens.size() || ck.params.config.num_labels != files.labels.size())
    throw InputError("checkpoint does not match the prepared vocabulary/labels");
  const auto test = make_examples(files.test, files.tokens, files.labels, ck.params.config.max_len);
  MetricsReport m = evaluate(ck.params, test, files.labels, c.decision_threshold);
  detail::write_json(c.out_dir() / "metrics.json", to_json(m));
  write_per_label_csv(m, c.out_dir() / "per_label.csv");
  log << "binary_accuracy " << m.binary_accuracy << " macro_f1 " << m.macro_f1 << " micro_f1 " << m.micro_f1
      << " (" << m.examples << " examples)\n";
  return m;
}

inline std::vector<GridRow> cmd_sweep(const ExperimentConfig& c, std::ostream& log) {
  const auto files = detail::load_prepared(c);
  const TrainConfig base = detail::resolved_train(c, c.train);
  if (c.sweep_learning_rates.empty() || c.sweep_max_lens.empty()) throw InputError("sweep grid is empty");
  ModelConfig mc = detail::resolved_model(c, files, base.max_len);
  detail::start_run(c);
  const auto grid = make_grid(base, c.sweep_learning_rates, c.sweep_max_lens);
  const auto rows =
      grid_search(grid, mc, GridData{files.train, files.test, files.tokens, files.labels}, c.decision_threshold);

  std::ostringstream csv;
  csv << "learning_rate,max_len,accuracy,macro_f1,micro_f1,best,error\n";
  json arr = json::array();
  for (const auto& r : rows) {
    csv << detail::fmt(r.learning_rate) << ',' << r.max_len << ',' << detail::fmt(r.accuracy) << ','
        << detail::fmt(r.macro_f1) << ',' << detail::fmt(r.micro_f1) << ',' << (r.best ? 1 : 0) << ','
        << detail::csv_quote(r.error) << '\n';
    json row = {{"learning_rate", r.learning_rate}, {"max_len", r.max_len}, {"best", r.best}, {"error", r.error}};
    for (auto [k, v] : {std::pair{"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"micro_f1", r.micro_f1}})
      row[k] = std::isnan(v) ? json(nullptr) : json(v);
    arr.push_back(row);
    log << "lr " << r.learning_rate << " max_len " << r.max_len << " accuracy " << r.accuracy
        << (r.best ? "  <- best" : "") << (r.error.empty() ? "" : "  error: " + r.error) << "\n";
  }
  detail::write_text(c.out_dir() / "sweep.csv", csv.str());
  detail::write_json(c.out_dir() / "sweep.json", arr);
  return rows;
}

/// Smoothed (or copied) training curves plus a metric table for external plotting.
inline void cmd_report(const ExperimentConfig& c, std::ostream& log) {
  const fs::path dir = c.out_dir();
  bool any = false;
  auto curve = [&](const char* in, const char* out) {
    if (!fs::is_regular_file(dir / in)) return;
    any = true;
    auto [header, cols] = detail::read_numeric_csv(dir / in);
    if (c.report_sigma)
      for (std::size_t i = 1; i < cols.size(); ++i)
        if (!cols[i].empty()) cols[i] = smooth_curve(cols[i], *c.report_sigma);
    detail::write_numeric_csv(dir / out, header, cols);
    log << "wrote " << (dir / out).string() << (c.report_sigma ? " (smoothed)" : " (raw copy)") << "\n";
  };
  curve("trace.csv", "curves.csv");
  curve("pretrain_trace.csv", "pretrain_curve.csv");
  if (fs::is_regular_file(dir / "metrics.json")) {
    any = true;
    const json m = read_json_file(dir / "metrics.json");
    std::ostringstream csv;
    csv << "metric,value\n";
    for (const char* k : {"binary_accuracy", "macro_precision", "macro_recall", "macro_f1", "macro_f1_label_mean",
                          "micro_f1"})
      csv << k << ',' << detail::fmt(m.at(k).get<double>()) << '\n';
    detail::write_text(dir / "metrics_table.csv", csv.str());
    log << "wrote " << (dir / "metrics_table.csv").string() << "\n";
  }
  if (!any) throw InputError("nothing to report in '" + dir.string() + "' (no trace.csv, pretrain_trace.csv or metrics.json)");
  detail::start_run(c);
}

}  // namespace mltc
