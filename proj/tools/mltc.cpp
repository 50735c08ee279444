// mltc: command-line driver for the multi-label classification toolkit.
//
//   mltc prepare  --config exp.json [--in raw.jsonl] [--threshold 5]
//   mltc pretrain --config exp.json [--resume run/pretrain.ckpt]
//   mltc train    --config exp.json
//   mltc evaluate --config exp.json [--threshold 0.5]
//   mltc sweep    --config exp.json
//   mltc report   --config exp.json
//   mltc synth    --out-dataset corpus.jsonl --records 1000 --labels 20
//
// Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mltc/experiment.hpp"
#include "mltc/synthetic.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config (json)");
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--out", f.out, "override the output directory");
  cmd->add_option("--set", f.overrides, "override any config key, e.g. --set train.epochs=3")->take_all();
}

mltc::ExperimentConfig resolve(const CommonFlags& f, nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json j = f.config.empty() ? nlohmann::json::object() : mltc::read_json_file(f.config);
  for (const auto& o : f.overrides) mltc::apply_override(j, o);
  if (f.seed) j["seed"] = *f.seed;
  if (f.out) j["out"] = *f.out;
  for (auto& [key, value] : extra.items()) mltc::apply_override(j, key + "=" + value.dump());
  return mltc::config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-label text classification toolkit"};
  app.require_subcommand(1);
  CommonFlags common;

  auto* prepare = app.add_subcommand("prepare", "filter labels, preprocess, split and build the vocabulary");
  std::optional<std::size_t> label_threshold;
  std::optional<std::string> in_path, out_dataset, out_vocab;
  add_common(prepare, common);
  prepare->add_option("--threshold", label_threshold, "label count threshold");
  prepare->add_option("--in", in_path, "raw dataset (jsonl or csv)");
  prepare->add_option("--out-dataset", out_dataset, "extra copy of the filtered dataset");
  prepare->add_option("--out-vocab", out_vocab, "extra copy of the token vocabulary");

  auto* pretrain = app.add_subcommand("pretrain", "masked or permutation language-model pretraining");
  std::optional<std::string> resume;
  bool identity_order = false;
  add_common(pretrain, common);
  pretrain->add_option("--resume", resume, "continue from a pretraining checkpoint");
  pretrain->add_flag("--identity-order", identity_order, "permutation objective with the left-to-right order only");

  auto* train = app.add_subcommand("train", "fine-tune the sigmoid classification head");
  std::optional<std::string> init;
  add_common(train, common);
  train->add_option("--init", init, "start from these weights (e.g. a pretraining checkpoint)");

  auto* evaluate = app.add_subcommand("evaluate", "score the trained model on the test split");
  std::optional<double> decision_threshold;
  add_common(evaluate, common);
  evaluate->add_option("--threshold", decision_threshold, "decision threshold on label probabilities");

  auto* sweep = app.add_subcommand("sweep", "learning-rate x max-length grid");
  add_common(sweep, common);
  sweep->add_option("--threshold", decision_threshold, "decision threshold on label probabilities");

  auto* report = app.add_subcommand("report", "smoothed curves and metric tables for plotting");
  std::optional<double> sigma;
  add_common(report, common);
  report->add_option("--sigma", sigma, "Gaussian smoothing width in epochs");

  auto* synth = app.add_subcommand("synth", "write a synthetic how-to corpus");
  mltc::SyntheticSpec spec;
  std::string synth_out;
  synth->add_option("--out-dataset", synth_out, "output path (.jsonl or .csv)")->required();
  synth->add_option("--records", spec.records, "number of records");
  synth->add_option("--labels", spec.labels, "number of distinct labels");
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--min-words", spec.min_words);
  synth->add_option("--max-words", spec.max_words);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    nlohmann::json extra = nlohmann::json::object();
    if (*prepare) {
      if (label_threshold) extra["labels.threshold"] = *label_threshold;
      if (in_path) extra["data.raw"] = *in_path;
      if (out_dataset) extra["data.export_dataset"] = *out_dataset;
      if (out_vocab) extra["tokenizer.export_vocab"] = *out_vocab;
      mltc::cmd_prepare(resolve(common, extra), std::cout);
    } else if (*pretrain) {
      if (resume) extra["pretrain.resume"] = *resume;
      if (identity_order) extra["pretrain.identity_orders"] = true;
      mltc::cmd_pretrain(resolve(common, extra), std::cout);
    } else if (*train) {
      if (init) extra["train.init_checkpoint"] = *init;
      mltc::cmd_train(resolve(common, extra), std::cout);
    } else if (*evaluate) {
      if (decision_threshold) extra["evaluate.decision_threshold"] = *decision_threshold;
      mltc::cmd_evaluate(resolve(common, extra), std::cout);
    } else if (*sweep) {
      if (decision_threshold) extra["evaluate.decision_threshold"] = *decision_threshold;
      mltc::cmd_sweep(resolve(common, extra), std::cout);
    } else if (*report) {
      if (sigma) extra["report.sigma"] = *sigma;
      mltc::cmd_report(resolve(common, extra), std::cout);
    } else if (*synth) {
      const auto d = mltc::make_synthetic_corpus(spec);
      mltc::save_dataset(d, synth_out, mltc::format_for_path(synth_out));
      std::cout << "wrote " << d.size() << " records to " << synth_out << "\n";
    }
  } catch (const mltc::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mltc::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
