#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "model.hpp"
#include "train.hpp"
#include "vocab.hpp"

namespace ear {

inline constexpr const char* kToolVersion = "0.1.0";

// One training run's full configuration, resolvable from a key=value file
// plus command-line overrides (applied after the file, in order).
//
// Keys mirror the struct fields they set: batch_size, learning_rate,
// weight_decay, warmup_fraction, max_epochs, patience, alpha, seed,
// use_class_weights, max_len, validation_fraction, early_stopping,
// renormalize_entropy (training); L, N, d_m, d_k, d_v, d_ff,
// attention_dropout (model); min_count, subword_merges (vocabulary);
// preset=paper-ear (20 epochs, no early stopping). max_len feeds both the
// trainer and the model. V is derived from the vocabulary and not settable.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  Vocabulary::Options vocab;

  void apply(const std::string& key, const std::string& value);
  // Every effective key, for the manifest; includes the derived V.
  std::map<std::string, std::string> resolved() const;
};

// key=value lines; blank lines and # comments are skipped. Order preserved.
// `origin` names the source in error messages.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin);
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path);

// EAR_NUM_THREADS: positive-integer cap on worker threads. All current
// module implementations are sequential, so any valid cap is respected;
// an unparsable value is an input error.
int thread_cap();

struct TrainCommand {
  std::string config_path;                                     // optional
  std::vector<std::pair<std::string, std::string>> overrides;  // after the file
  std::string train_path;                                      // required
  std::string val_path;    // optional; stratified split otherwise
  std::string out_dir;     // required
  int num_seeds = 1;       // seeds seed .. seed+num_seeds-1
  bool quiet = false;
};

// Writes vocab.txt, manifest.json (before training), per-seed best.ckpt and
// train_log.jsonl, and summary.json under out_dir. Throws internal_error if
// any seed run fails; completed artifacts stay on disk.
void run_train(const TrainCommand& cmd, std::ostream& out);

struct EvalCommand {
  std::string checkpoint_path;
  std::string vocab_path;
  std::string data_path;
  std::string terms_path;
  std::string out_dir;
  // Optional sidecar aligned row-for-row with the dataset; term membership
  // is detected from the text when absent.
  std::string memberships_path;
  std::string baseline_scores_path;  // optional; adds F1 significance block
  int batch_size = 64;
  int bootstrap_samples = 1000;
  double bootstrap_fraction = 0.20;
  std::uint64_t seed = 0;
  bool quiet = false;
};

// Writes scores.tsv, memberships.tsv, report.json, report.csv under out_dir.
void run_eval(const EvalCommand& cmd, std::ostream& out);

struct ExtractCommand {
  std::string checkpoint_path;
  std::string vocab_path;
  std::string data_path;
  std::string out_csv_path;
  std::string out_json_path;  // optional; adds the per-layer view
  double min_doc_freq = 0.01;
  int top_k = 50;
  bool quiet = false;
};

void run_extract(const ExtractCommand& cmd, std::ostream& out);

struct GenSyntheticCommand {
  std::string templates_path;
  std::string terms_path;
  std::string out_data_path;
  std::string out_memberships_path;
  bool allow_unbalanced = false;
  bool quiet = false;
};

void run_gen_synthetic(const GenSyntheticCommand& cmd, std::ostream& out);

struct GradcheckCommand {
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
};

// Prints the max relative error; throws internal_error when it exceeds the
// tolerance. `max_rel_err` (optional) is set before any throw.
void run_gradcheck(const GradcheckCommand& cmd, std::ostream& out,
                   double* max_rel_err = nullptr);

// Runs `body`, mapping success to 0, input_error to 2 and anything else to
// 1; the message lands on `err`.
int run_command(const std::function<void()>& body, std::ostream& err);

}  // namespace ear
