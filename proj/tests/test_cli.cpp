#include <gtest/gtest.h>

#include "mltc/experiment.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace mltc;
namespace fs = std::filesystem;

namespace {

CliRun run(const std::string& args, const fs::path& dir) { return run_cli(args, dir); }

// Small model and short runs so each CLI call finishes in seconds.
fs::path small_config(const fs::path& dir, const std::string& extra_train = "") {
  const fs::path cfg = dir / "exp.json";
  write_file(cfg, R"({
  "out": ")" + (dir / "run").string() + R"(",
  "data": {"raw": ")" MLTC_FIXTURE R"("},
  "labels": {"threshold": 5},
  "tokenizer": {"max_len": 48},
  "model": {"d_model": 16, "n_heads": 2, "n_layers": 1, "d_ff": 32},
  "pretrain": {"epochs": 1, "batch_size": 8},
  "train": {"epochs": 2, "batch_size": 8)" + extra_train + R"(}
})");
  return cfg;
}

std::string arg(const fs::path& p) { return quoted(p); }

}  // namespace

TEST(Cli, PrepareFixtureAtThresholdFive) {
  auto dir = scratch_dir("cli_prepare");
  auto cfg = small_config(dir);
  CliRun r = run("prepare --config " + arg(cfg), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("labels: 9 -> 3"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("6 records removed"), std::string::npos) << r.output;
  auto rep = read_json_file(dir / "run" / "prepare_report.json");
  EXPECT_EQ(rep.at("selected_labels"), (nlohmann::json{"Health", "Home and Garden", "Pets and Animals"}));
  EXPECT_EQ(rep.at("records_out"), 54);
  for (const char* f : {"dataset.jsonl", "train.jsonl", "test.jsonl", "labels.txt", "vocab.txt", "resolved_config.json"})
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
}

TEST(Cli, PrepareThresholdOneKeepsEverything) {
  auto dir = scratch_dir("cli_prepare_one");
  auto cfg = small_config(dir);
  CliRun r = run("prepare --config " + arg(cfg) + " --threshold 1 --out-dataset " + arg(dir / "kept.csv") +
                  " --out-vocab " + arg(dir / "vocab_copy.txt"),
              dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("labels: 9 -> 9"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("0 records removed"), std::string::npos) << r.output;
  EXPECT_EQ(load_dataset(dir / "kept.csv", Format::csv).size(), 60u);
  EXPECT_EQ(read_file(dir / "vocab_copy.txt"), read_file(dir / "run" / "vocab.txt"));
}

TEST(Cli, InputErrorsExitWithTwo) {
  auto dir = scratch_dir("cli_errors");
  auto cfg = small_config(dir);
  CliRun missing = run("prepare --config " + arg(cfg) + " --in " + arg(dir / "nope.jsonl"), dir);
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.output.find("does not exist"), std::string::npos) << missing.output;
  EXPECT_EQ(run("prepare --config " + arg(cfg) + " --threshold 1000", dir).code, 2);
  EXPECT_EQ(run("prepare --config " + arg(cfg) + " --set labels.colour=3", dir).code, 2);
  EXPECT_EQ(run("train --config " + arg(dir / "absent.json"), dir).code, 2);
  EXPECT_EQ(run("frobnicate", dir).code, 2);
  EXPECT_EQ(run("--help", dir).code, 0);
}

TEST(Cli, PretrainResumeAndTrainEvaluateReport) {
  auto dir = scratch_dir("cli_pipeline");
  auto cfg = small_config(dir);
  const fs::path out = dir / "run";
  ASSERT_EQ(run("prepare --config " + arg(cfg), dir).code, 0);

  CliRun p1 = run("pretrain --config " + arg(cfg), dir);
  ASSERT_EQ(p1.code, 0) << p1.output;
  auto [h1, c1] = detail::read_numeric_csv(out / "pretrain_trace.csv");
  EXPECT_EQ(c1[0].size(), 1u);
  Checkpoint first = load_checkpoint(out / "pretrain.ckpt");
  ASSERT_TRUE(first.optimizer);
  const auto steps = first.optimizer->step;
  EXPECT_GT(steps, 0u);

  fs::copy_file(out / "pretrain.ckpt", dir / "epoch1.ckpt");
  CliRun p2 = run("pretrain --config " + arg(cfg) + " --resume " + arg(dir / "epoch1.ckpt"), dir);
  ASSERT_EQ(p2.code, 0) << p2.output;
  Checkpoint second = load_checkpoint(out / "pretrain.ckpt");
  EXPECT_EQ(second.optimizer->step, 2 * steps);
  EXPECT_EQ(second.meta.at("epochs_done"), 2);
  auto [h2, c2] = detail::read_numeric_csv(out / "pretrain_trace.csv");
  EXPECT_EQ(c2[0], std::vector<double>{2.0});

  CliRun t = run("train --config " + arg(cfg) + " --init " + arg(out / "pretrain.ckpt"), dir);
  ASSERT_EQ(t.code, 0) << t.output;
  auto [th, tc] = detail::read_numeric_csv(out / "trace.csv");
  EXPECT_EQ(th, (std::vector<std::string>{"epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy"}));
  EXPECT_EQ(tc[0].size(), 2u);

  CliRun e = run("evaluate --config " + arg(cfg), dir);
  ASSERT_EQ(e.code, 0) << e.output;
  auto m = read_json_file(out / "metrics.json");
  for (const char* k : {"binary_accuracy", "macro_precision", "macro_recall", "macro_f1", "micro_f1"}) {
    EXPECT_GE(m.at(k).get<double>(), 0.0);
    EXPECT_LE(m.at(k).get<double>(), 1.0);
  }
  EXPECT_TRUE(fs::exists(out / "per_label.csv"));

  CliRun raw = run("report --config " + arg(cfg), dir);
  ASSERT_EQ(raw.code, 0) << raw.output;
  EXPECT_EQ(detail::read_numeric_csv(out / "curves.csv").second, tc);
  EXPECT_TRUE(fs::exists(out / "pretrain_curve.csv"));
  EXPECT_TRUE(fs::exists(out / "metrics_table.csv"));
  CliRun smooth = run("report --config " + arg(cfg) + " --sigma 1.5", dir);
  ASSERT_EQ(smooth.code, 0) << smooth.output;
  auto sm = detail::read_numeric_csv(out / "curves.csv").second;
  EXPECT_EQ(sm[0], tc[0]);
  for (std::size_t col = 1; col < tc.size(); ++col) EXPECT_EQ(sm[col], smooth_curve(tc[col], 1.5));
}

TEST(Cli, IdentityOrderPretrainingMatchesAutoregressiveLoss) {
  auto dir = scratch_dir("cli_identity");
  auto cfg = small_config(dir);
  const fs::path out = dir / "run";
  ASSERT_EQ(run("prepare --config " + arg(cfg), dir).code, 0);
  // lr 0 leaves the weights at their initial values, so the checkpoint holds them.
  CliRun r = run("pretrain --config " + arg(cfg) +
                  " --identity-order --set pretrain.objective=plm_pretrain pretrain.learning_rate=0 "
                  "pretrain.batch_size=1",
              dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const double logged = detail::read_numeric_csv(out / "pretrain_trace.csv").second[1].at(0);
  const Parameters p = load_checkpoint(out / "pretrain.ckpt").params;
  const Vocab v = load_vocab(out / "vocab.txt");
  const Dataset train = load_dataset(out / "train.jsonl", Format::jsonl);
  double sum = 0;
  for (const auto& rec : train.records) {
    auto in = encode_text(rec.text, v, 48);
    sum += oracle::autoregressive_loss(p, std::vector<int>(in.input_ids.begin(), in.input_ids.begin() +
                                                                                   static_cast<long>(in.true_length)));
  }
  EXPECT_NEAR(logged, sum / static_cast<double>(train.size()), 1e-10);
}

TEST(Cli, SweepWritesOneRowPerCell) {
  auto dir = scratch_dir("cli_sweep");
  auto cfg = small_config(dir);
  ASSERT_EQ(run("prepare --config " + arg(cfg), dir).code, 0);
  CliRun r = run("sweep --config " + arg(cfg) +
                  " --set 'sweep.learning_rates=[0.0001,0.0005]' 'sweep.max_lens=[32,48]' train.epochs=1",
              dir);
  ASSERT_EQ(r.code, 0) << r.output;
  auto rows = read_json_file(dir / "run" / "sweep.json");
  ASSERT_EQ(rows.size(), 4u);
  int best = 0;
  for (const auto& row : rows) best += row.at("best").get<bool>();
  EXPECT_EQ(best, 1);
  auto resolved = read_json_file(dir / "run" / "resolved_config.json");
  EXPECT_EQ(resolved.at("sweep").at("max_lens"), (nlohmann::json{32, 48}));
}

TEST(Cli, SynthWritesCorpus) {
  auto dir = scratch_dir("cli_synth");
  CliRun r = run("synth --out-dataset " + arg(dir / "s.jsonl") + " --records 50 --labels 5 --seed 4", dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(load_dataset(dir / "s.jsonl", Format::jsonl).size(), 50u);
}
