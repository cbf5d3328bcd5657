#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "optimizer.hpp"
#include "vocab.hpp"

namespace ear {

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 2e-5;
  double weight_decay = 0.01;
  double warmup_fraction = 0.10;
  int max_epochs = 30;
  int patience = 5;
  double alpha = 0.01;
  std::uint64_t seed = 0;
  bool use_class_weights = true;
  int max_len = 120;

  double validation_fraction = 0.10;  // used when no validation file is given
  bool early_stopping = true;
  bool renormalize_entropy = true;  // ablation switch for the extra softmax

  void validate() const;
  // 20 epochs, no early stopping; the rest unchanged.
  static TrainConfig paper_ear();
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_total = 0.0;
  double train_classification = 0.0;
  double train_regularization = 0.0;
  double val_total = 0.0;
  double val_classification = 0.0;
  double val_regularization = 0.0;
  double val_f1_weighted = 0.0;
  double val_f1_hate = 0.0;

  // One JSON object, no trailing newline; TrainLog::to_jsonl emits exactly
  // these lines, so incremental writers stay byte-compatible.
  std::string to_json_line() const;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;       // 1-based; 0 when no epoch finished
  std::string stop_reason;  // "max_epochs", "early_stopping", "diverged"

  std::string to_jsonl() const;  // one record per line, summary line last
};

struct GradientSet {
  std::map<std::string, Mat> grads;
  LossBreakdown loss;
};

// Builds one tape over the whole batch and runs a single backward sweep.
// L_C is the prior-weighted batch mean; the regularizer averages each
// sequence's summed layer entropies over the batch.
GradientSet compute_gradients(const ModelConfig& model_config, const Parameters& params,
                              const std::vector<EncodedSequence>& batch,
                              const std::vector<int>& labels, double alpha,
                              const std::array<double, 2>& priors, bool use_class_weights,
                              const EntropyOptions& entropy_options = {},
                              Rng* dropout_rng = nullptr);

// Seed-derived stratified split preserving class balance; returns
// (train_part, validation_part).
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& data,
                                                           double validation_fraction,
                                                           std::uint64_t seed);

struct TrainResult {
  Checkpoint checkpoint;  // parameters from the best validation epoch
  TrainLog log;
};

// Epoch callback fires after each epoch record is appended (incremental log
// writing); a divergence error is thrown after the callback has seen the
// final record.
using EpochCallback = std::function<void(const EpochRecord&, const TrainLog&)>;

TrainResult train(const ModelConfig& model_config, const TrainConfig& config,
                  const Vocabulary& vocab, const LabeledDataset& train_set,
                  const LabeledDataset& validation_set, const EpochCallback& on_epoch = {});

struct SeedRun {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::optional<TrainResult> result;
};

struct SeedSummary {
  int n_runs = 0;
  int n_failed = 0;
  double mean_val_total = 0.0;
  double mean_val_f1_weighted = 0.0;
  double mean_val_f1_hate = 0.0;
  // Sample standard deviation; absent with fewer than 2 successful runs.
  std::optional<double> stddev_val_total;
  std::optional<double> stddev_val_f1_weighted;
  std::optional<double> stddev_val_f1_hate;

  std::string to_json() const;
};

using RunCallback = std::function<void(const SeedRun&)>;

// Seeds config.seed .. config.seed + n_seeds - 1, sequentially; a failing
// run is recorded and the rest continue. `on_epoch` fires inside each run.
std::vector<SeedRun> run_seeds(const ModelConfig& model_config, const TrainConfig& config,
                               const Vocabulary& vocab, const LabeledDataset& train_set,
                               const LabeledDataset& validation_set, int n_seeds,
                               const RunCallback& on_run = {}, const EpochCallback& on_epoch = {});

SeedSummary summarize_runs(const std::vector<SeedRun>& runs);

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int n_checked = 0;
  bool pass = false;
};

// Exhaustive central-difference check of every parameter entry on a tiny
// model, over alpha in {0, 0.01, 1}. Threshold 1e-4 relative error.
GradcheckReport gradcheck(std::uint64_t seed, double step = 1e-5, double tolerance = 1e-4);

}  // namespace ear
