#include "doctest.h"

#include <cmath>

#include "common.hpp"
#include "dataset.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "train.hpp"
#include "vocab.hpp"

using namespace ear;

namespace {

// Tiny separable corpus: hostile rows are label 1.
LabeledDataset toy_dataset(int copies) {
  LabeledDataset data;
  const std::vector<std::pair<std::string, int>> rows = {
      {"i hate you so much", 1},  {"you are awful and vile", 1}, {"everyone despises you", 1},
      {"i love this place", 0},   {"you are kind and warm", 0},  {"what a lovely day", 0},
  };
  for (int c = 0; c < copies; ++c) {
    for (const auto& [text, label] : rows) data.examples.push_back({text, label});
  }
  return data;
}

ModelConfig toy_model(const Vocabulary& vocab) {
  ModelConfig c;
  c.L = 1;
  c.N = 1;
  c.d_m = 8;
  c.d_k = 4;
  c.d_v = 8;
  c.d_ff = 16;
  c.V = vocab.size();
  c.max_len = 12;
  return c;
}

Vocabulary toy_vocab(const LabeledDataset& data) {
  std::vector<std::string> corpus;
  for (const LabeledExample& ex : data.examples) corpus.push_back(ex.text);
  return Vocabulary::build(corpus, 1);
}

}  // namespace

TEST_CASE("learning-rate schedule warms up then decays linearly") {
  CHECK(schedule_factor(0, 100, 0.10) == doctest::Approx(0.1));
  CHECK(schedule_factor(9, 100, 0.10) == doctest::Approx(1.0));
  CHECK(schedule_factor(10, 100, 0.10) == doctest::Approx(1.0));
  CHECK(schedule_factor(55, 100, 0.10) == doctest::Approx(0.5));
  CHECK(schedule_factor(99, 100, 0.10) == doctest::Approx(1.0 / 90.0));
  // No warmup: starts at full rate.
  CHECK(schedule_factor(0, 10, 0.0) == doctest::Approx(1.0));
  for (int t = 1; t < 100; ++t) {
    const double prev = schedule_factor(t - 1, 100, 0.10);
    const double cur = schedule_factor(t, 100, 0.10);
    if (t < 10) CHECK(cur >= prev);
    else CHECK(cur <= prev);
  }
  CHECK_THROWS_AS(schedule_factor(0, 10, 1.0), input_error);
}

TEST_CASE("optimizer step with zero learning rate is a no-op") {
  LabeledDataset data = toy_dataset(1);
  Vocabulary vocab = toy_vocab(data);
  ModelConfig mc = toy_model(vocab);
  Rng rng(5);
  Parameters params = Parameters::init(mc, rng);
  Parameters before = params;
  AdamW opt(params, AdamWConfig{});
  std::map<std::string, Mat> grads;
  Rng grng(6);
  for (const auto& [name, m] : params.tensors) {
    Mat g(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) g(i, j) = grng.normal();
    }
    grads[name] = g;
  }
  opt.step(params, grads, 0.0);
  for (const auto& [name, m] : params.tensors) {
    CHECK(m == before.tensors.at(name));
  }
  // A real step moves against the gradient sign and applies decoupled decay
  // only to decaying tensors.
  opt.step(params, grads, 0.01);
  CHECK(params.tensors.at("cls.w") != before.tensors.at("cls.w"));
}

TEST_CASE("adaptive moments follow the known first-step form") {
  // Single 1x1 tensor named like a bias: no weight decay interference.
  Parameters p;
  p.tensors["cls.b"] = Mat::Constant(1, 1, 1.0);
  AdamW opt(p, AdamWConfig{0.9, 0.999, 1e-8, 0.5});
  std::map<std::string, Mat> g;
  g["cls.b"] = Mat::Constant(1, 1, 2.0);
  opt.step(p, g, 0.1);
  // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  CHECK(p.tensors["cls.b"](0, 0) == doctest::Approx(1.0 - 0.1 * (2.0 / (2.0 + 1e-8))).epsilon(1e-12));

  // Same setup on a decaying name gets the extra decay term.
  Parameters pw;
  pw.tensors["cls.w"] = Mat::Constant(1, 1, 1.0);
  AdamW optw(pw, AdamWConfig{0.9, 0.999, 1e-8, 0.5});
  std::map<std::string, Mat> gw;
  gw["cls.w"] = Mat::Constant(1, 1, 2.0);
  optw.step(pw, gw, 0.1);
  const double after_grad = 1.0 - 0.1 * (2.0 / (2.0 + 1e-8));
  CHECK(pw.tensors["cls.w"](0, 0) == doctest::Approx(after_grad - 0.1 * 0.5 * after_grad).epsilon(1e-12));
}

TEST_CASE("classifier bias gradient matches the closed-form cross-entropy oracle") {
  LabeledDataset data = toy_dataset(1);
  Vocabulary vocab = toy_vocab(data);
  ModelConfig mc = toy_model(vocab);
  Rng rng(11);
  Parameters params = Parameters::init(mc, rng);

  EncodedSequence seq = vocab.encode("i hate you", 12);
  const std::array<double, 2> priors = {0.7, 0.3};
  const int label = 1;
  GradientSet gs = compute_gradients(mc, params, {seq}, {label}, 0.0, priors, true);

  ForwardResult fwd = model_forward(mc, params, {seq});
  Eigen::RowVectorXd p = softmax_row(fwd.logits.row(0));
  Eigen::RowVectorXd expected = p;
  expected[label] -= 1.0;
  expected /= priors[label];
  CHECK((gs.grads.at("cls.b").row(0) - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(gs.loss.regularization == 0.0);
  CHECK(gs.loss.total == gs.loss.classification);
}

TEST_CASE("uniform attention is a stationary point of the regularizer") {
  LabeledDataset data = toy_dataset(1);
  Vocabulary vocab = toy_vocab(data);
  ModelConfig mc = toy_model(vocab);
  Rng rng(13);
  Parameters params = Parameters::init(mc, rng);
  for (auto& [name, m] : params.tensors) {
    if (name.find(".wq") != std::string::npos || name.find(".wk") != std::string::npos) m.setZero();
  }
  EncodedSequence seq = vocab.encode("i love this place", 12);
  const std::array<double, 2> priors = {0.5, 0.5};
  GradientSet with_reg = compute_gradients(mc, params, {seq}, {0}, 1.0, priors, true);
  GradientSet without = compute_gradients(mc, params, {seq}, {0}, 0.0, priors, true);
  // The regularizer's own contribution is the difference; at exactly uniform
  // rows the entropy is at an interior maximum, so it vanishes.
  for (const char* name : {"layer0.head0.wq", "layer0.head0.wk"}) {
    const Mat diff = with_reg.grads.at(name) - without.grads.at(name);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-10);
  }
  // L_R itself is -1 * sum of layer entropies (alpha=1), nonzero.
  CHECK(with_reg.loss.regularization < 0.0);
}

TEST_CASE("every parameter gradient matches central finite differences") {
  GradcheckReport report = gradcheck(0);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-4);
  CHECK(report.n_checked > 1000);
}

TEST_CASE("stratified split preserves class balance deterministically") {
  LabeledDataset data;
  for (int i = 0; i < 30; ++i) data.examples.push_back({"pos " + std::to_string(i), 1});
  for (int i = 0; i < 70; ++i) data.examples.push_back({"neg " + std::to_string(i), 0});
  auto [train_a, val_a] = stratified_split(data, 0.10, 42);
  CHECK(val_a.label_counts()[1] == 3);
  CHECK(val_a.label_counts()[0] == 7);
  CHECK(train_a.size() + val_a.size() == data.size());
  auto [train_b, val_b] = stratified_split(data, 0.10, 42);
  REQUIRE(val_b.size() == val_a.size());
  for (std::size_t i = 0; i < val_a.size(); ++i) {
    CHECK(val_a.examples[i].text == val_b.examples[i].text);
  }
  // One example per class always stays on the training side.
  LabeledDataset tiny;
  tiny.examples.push_back({"only positive", 1});
  for (int i = 0; i < 9; ++i) tiny.examples.push_back({"neg " + std::to_string(i), 0});
  auto [train_c, val_c] = stratified_split(tiny, 0.5, 1);
  CHECK(train_c.label_counts()[1] == 1);
}

TEST_CASE("training learns the toy task and logs a faithful record") {
  LabeledDataset data = toy_dataset(4);  // 24 rows
  Vocabulary vocab = toy_vocab(data);
  ModelConfig mc = toy_model(vocab);
  auto [train_set, val_set] = stratified_split(data, 0.25, 7);

  TrainConfig tc;
  tc.batch_size = 8;
  tc.learning_rate = 5e-3;
  tc.max_epochs = 12;
  tc.patience = 12;
  tc.alpha = 0.01;
  tc.seed = 3;
  tc.max_len = 12;

  int callbacks = 0;
  TrainResult result = train(mc, tc, vocab, train_set, val_set,
                             [&](const EpochRecord&, const TrainLog&) { ++callbacks; });
  REQUIRE(!result.log.epochs.empty());
  CHECK(callbacks == static_cast<int>(result.log.epochs.size()));
  CHECK(result.log.best_epoch >= 1);
  CHECK(result.log.best_epoch <= static_cast<int>(result.log.epochs.size()));
  // Epoch indices are monotone from 1.
  for (std::size_t i = 0; i < result.log.epochs.size(); ++i) {
    CHECK(result.log.epochs[i].epoch == static_cast<int>(i) + 1);
  }
  // The task is separable; the model should fit it.
  const EpochRecord& last = result.log.epochs.back();
  const EpochRecord& first = result.log.epochs.front();
  CHECK(last.train_classification < first.train_classification);
  // Best-epoch record has the minimum validation loss seen.
  double min_val = result.log.epochs.front().val_total;
  for (const EpochRecord& r : result.log.epochs) min_val = std::min(min_val, r.val_total);
  CHECK(result.log.epochs[result.log.best_epoch - 1].val_total == doctest::Approx(min_val));
  // Checkpoint carries the vocab hash and a valid parameter set.
  CHECK(result.checkpoint.vocab_hash == vocab.content_hash());
  CHECK_NOTHROW(result.checkpoint.params.validate_against(mc));

  // JSON-lines: one line per epoch plus the summary.
  const std::string jsonl = result.log.to_jsonl();
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') ==
        static_cast<long>(result.log.epochs.size()) + 1);
  CHECK(jsonl.find("\"stop_reason\"") != std::string::npos);

  // Same seed and config reproduce the log byte for byte.
  TrainResult again = train(mc, tc, vocab, train_set, val_set);
  CHECK(again.log.to_jsonl() == jsonl);

  // A different seed gives a different trajectory.
  TrainConfig other = tc;
  other.seed = 4;
  TrainResult different = train(mc, other, vocab, train_set, val_set);
  CHECK(different.log.to_jsonl() != jsonl);
}

TEST_CASE("alpha zero logs no regularization anywhere") {
  LabeledDataset data = toy_dataset(2);
  Vocabulary vocab = toy_vocab(data);
  ModelConfig mc = toy_model(vocab);
  auto [train_set, val_set] = stratified_split(data, 0.25, 7);
  TrainConfig tc;
  tc.batch_size = 6;
  tc.learning_rate = 1e-3;
  tc.max_epochs = 3;
  tc.alpha = 0.0;
  tc.seed = 1;
  tc.max_len = 12;
  TrainResult result = train(mc, tc, vocab, train_set, val_set);
  for (const EpochRecord& r : result.log.epochs) {
    CHECK(r.train_regularization == 0.0);
    CHECK(r.val_regularization == 0.0);
    CHECK(r.train_total == r.train_classification);
  }
}

TEST_CASE("patience zero stops at the first non-improving epoch") {
  LabeledDataset data = toy_dataset(2);
  Vocabulary vocab = toy_vocab(data);
  ModelConfig mc = toy_model(vocab);
  auto [train_set, val_set] = stratified_split(data, 0.25, 7);
  TrainConfig tc;
  tc.batch_size = 6;
  tc.learning_rate = 0.0;  // nothing changes, so epoch 2 cannot improve
  tc.max_epochs = 10;
  tc.patience = 0;
  tc.seed = 1;
  tc.max_len = 12;
  TrainResult result = train(mc, tc, vocab, train_set, val_set);
  CHECK(result.log.epochs.size() == 2);
  CHECK(result.log.stop_reason == "early_stopping");
  CHECK(result.log.best_epoch == 1);

  // The paper-faithful preset never early-stops.
  TrainConfig preset = TrainConfig::paper_ear();
  CHECK(preset.max_epochs == 20);
  CHECK_FALSE(preset.early_stopping);
  preset.batch_size = 6;
  preset.learning_rate = 0.0;
  preset.max_epochs = 4;
  preset.seed = 1;
  preset.max_len = 12;
  TrainResult full = train(mc, preset, vocab, train_set, val_set);
  CHECK(full.log.epochs.size() == 4);
  CHECK(full.log.stop_reason == "max_epochs");
}

TEST_CASE("run_seeds isolates failures and summarizes the rest") {
  LabeledDataset data = toy_dataset(2);
  Vocabulary vocab = toy_vocab(data);
  ModelConfig mc = toy_model(vocab);
  auto [train_set, val_set] = stratified_split(data, 0.25, 7);
  TrainConfig tc;
  tc.batch_size = 6;
  tc.learning_rate = 2e-3;
  tc.max_epochs = 2;
  tc.seed = 10;
  tc.max_len = 12;

  std::vector<SeedRun> runs = run_seeds(mc, tc, vocab, train_set, val_set, 3);
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].seed == 10);
  CHECK(runs[2].seed == 12);
  for (const SeedRun& run : runs) CHECK_FALSE(run.failed);
  // Distinct seeds produce distinct logs.
  CHECK(runs[0].result->log.to_jsonl() != runs[1].result->log.to_jsonl());

  SeedSummary summary = summarize_runs(runs);
  CHECK(summary.n_runs == 3);
  CHECK(summary.n_failed == 0);
  CHECK(summary.stddev_val_total.has_value());

  // Re-running the same seed reproduces the identical log.
  std::vector<SeedRun> rerun = run_seeds(mc, tc, vocab, train_set, val_set, 1);
  CHECK(rerun[0].result->log.to_jsonl() == runs[0].result->log.to_jsonl());

  // Single-run summaries omit the spread.
  SeedSummary single = summarize_runs(rerun);
  CHECK_FALSE(single.stddev_val_total.has_value());
  CHECK(single.to_json().find("null") != std::string::npos);
}
