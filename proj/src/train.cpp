#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common.hpp"
#include "json.hpp"
#include "metrics.hpp"

namespace ear {

void TrainConfig::validate() const {
  if (batch_size < 1) throw input_error("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw input_error("learning_rate must be finite and >= 0");
  }
  if (!(weight_decay >= 0.0)) throw input_error("weight_decay must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw input_error("warmup_fraction must be in [0, 1)");
  }
  if (max_epochs < 1) throw input_error("max_epochs must be >= 1");
  if (patience < 0) throw input_error("patience must be >= 0");
  if (!std::isfinite(alpha)) throw input_error("alpha must be finite");
  if (max_len < 2) throw input_error("max_len must be >= 2");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw input_error("validation_fraction must be in [0, 1)");
  }
}

TrainConfig TrainConfig::paper_ear() {
  TrainConfig c;
  c.max_epochs = 20;
  c.early_stopping = false;
  return c;
}

namespace {

nlohmann::json epoch_to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_total", r.train_total},
          {"train_classification", r.train_classification},
          {"train_regularization", r.train_regularization},
          {"val_total", r.val_total},
          {"val_classification", r.val_classification},
          {"val_regularization", r.val_regularization},
          {"val_f1_weighted", r.val_f1_weighted},
          {"val_f1_hate", r.val_f1_hate}};
}

}  // namespace

std::string EpochRecord::to_json_line() const { return epoch_to_json(*this).dump(); }

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const EpochRecord& r : epochs) {
    out += r.to_json_line();
    out.push_back('\n');
  }
  nlohmann::json summary = {{"summary", {{"best_epoch", best_epoch}, {"stop_reason", stop_reason}}}};
  out += summary.dump();
  out.push_back('\n');
  return out;
}

GradientSet compute_gradients(const ModelConfig& model_config, const Parameters& params,
                              const std::vector<EncodedSequence>& batch,
                              const std::vector<int>& labels, double alpha,
                              const std::array<double, 2>& priors, bool use_class_weights,
                              const EntropyOptions& entropy_options, Rng* dropout_rng) {
  if (batch.empty()) throw input_error("gradient computation over an empty batch");
  if (batch.size() != labels.size()) throw internal_error("batch/labels size mismatch");

  ag::Graph graph;
  ModelGraph model(graph, model_config, params);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  ag::Var ce_sum;
  ag::Var entropy_sum;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    SequenceForward fwd = model.forward(batch[b], dropout_rng);
    ag::Var ce = sample_loss(graph, fwd.logits, labels[b], priors, use_class_weights);
    ce_sum = ce_sum.valid() ? graph.add(ce_sum, ce) : ce;
    if (alpha != 0.0) {
      ag::Var h = sequence_entropy_sum(graph, fwd, entropy_options);
      entropy_sum = entropy_sum.valid() ? graph.add(entropy_sum, h) : h;
    }
  }
  ag::Var lc = graph.scale(ce_sum, inv_b);
  const double lc_value = lc.value()(0, 0);
  if (!std::isfinite(lc_value)) throw internal_error("classification loss is non-finite");

  double lr_value = 0.0;
  ag::Var total = lc;
  if (alpha != 0.0) {
    ag::Var lr_term = graph.scale(entropy_sum, -alpha * inv_b);
    lr_value = lr_term.value()(0, 0);
    if (!std::isfinite(lr_value)) throw internal_error("regularization term is non-finite");
    total = graph.add(lc, lr_term);
  }
  graph.backward(total);

  GradientSet out;
  out.loss = total_loss(lc_value, lr_value, alpha);
  for (const auto& [name, var] : model.param_vars()) {
    out.grads[name] = graph.grad(var);
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& data,
                                                           double validation_fraction,
                                                           std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw input_error("validation_fraction must be in [0, 1)");
  }
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    by_class[static_cast<std::size_t>(data.examples[i].label)].push_back(i);
  }
  std::vector<bool> in_val(data.examples.size(), false);
  for (int cls = 0; cls < 2; ++cls) {
    auto& idx = by_class[static_cast<std::size_t>(cls)];
    if (idx.empty()) continue;
    Rng rng = Rng::stream(seed, "split", cls);
    rng.shuffle(idx);
    // Keep at least one example of each class on the training side.
    std::size_t take = static_cast<std::size_t>(
        std::llround(validation_fraction * static_cast<double>(idx.size())));
    take = std::min(take, idx.size() - 1);
    for (std::size_t k = 0; k < take; ++k) in_val[idx[k]] = true;
  }
  LabeledDataset train_part, val_part;
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    (in_val[i] ? val_part : train_part).examples.push_back(data.examples[i]);
  }
  return {std::move(train_part), std::move(val_part)};
}

namespace {

struct EvalStats {
  double total = 0.0, classification = 0.0, regularization = 0.0;
  double f1_weighted = 0.0, f1_hate = 0.0;
};

EvalStats evaluate(const ModelConfig& model_config, const Parameters& params,
                   const std::vector<EncodedSequence>& sequences, const std::vector<int>& labels,
                   double alpha, const std::array<double, 2>& priors, bool use_class_weights,
                   const EntropyOptions& entropy_options, int batch_size) {
  std::vector<double> probs;
  probs.reserve(sequences.size());
  double ce_sum = 0.0;
  double entropy_sum = 0.0;
  for (std::size_t start = 0; start < sequences.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(sequences.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<EncodedSequence> chunk(sequences.begin() + start, sequences.begin() + end);
    std::vector<int> chunk_labels(labels.begin() + start, labels.begin() + end);
    ForwardResult fwd = model_forward(model_config, params, chunk);
    ce_sum += classification_loss(fwd.logits, chunk_labels, priors, use_class_weights) *
              static_cast<double>(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      probs.push_back(softmax_row(fwd.logits.row(static_cast<Eigen::Index>(i)))[1]);
      if (alpha != 0.0) {
        const EntropyProfile profile = entropy_profile(fwd.records[i], entropy_options);
        for (double h : profile.H_layer) entropy_sum += h;
      }
    }
  }
  EvalStats stats;
  const double n = static_cast<double>(sequences.size());
  stats.classification = ce_sum / n;
  stats.regularization = -alpha * entropy_sum / n;
  stats.total = stats.classification + stats.regularization;
  const F1Pair f1 = f1_scores(probs, labels);
  stats.f1_weighted = f1.weighted;
  stats.f1_hate = f1.hate;
  return stats;
}

}  // namespace

TrainResult train(const ModelConfig& model_config, const TrainConfig& config,
                  const Vocabulary& vocab, const LabeledDataset& train_set,
                  const LabeledDataset& validation_set, const EpochCallback& on_epoch) {
  config.validate();
  model_config.validate();
  if (model_config.V != vocab.size()) {
    throw input_error("model config V=" + std::to_string(model_config.V) +
                      " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  if (train_set.examples.empty()) throw input_error("training set is empty");
  if (validation_set.examples.empty()) throw input_error("validation set is empty");

  const std::array<double, 2> priors = train_set.priors();
  if (config.use_class_weights && (priors[0] <= 0.0 || priors[1] <= 0.0)) {
    throw input_error("class weighting needs both classes present in the training set");
  }
  const EntropyOptions entropy_options{config.renormalize_entropy};

  std::vector<EncodedSequence> train_seqs;
  std::vector<int> train_labels;
  for (const LabeledExample& ex : train_set.examples) {
    train_seqs.push_back(vocab.encode(ex.text, config.max_len));
    train_labels.push_back(ex.label);
  }
  std::vector<EncodedSequence> val_seqs;
  std::vector<int> val_labels;
  for (const LabeledExample& ex : validation_set.examples) {
    val_seqs.push_back(vocab.encode(ex.text, config.max_len));
    val_labels.push_back(ex.label);
  }

  const std::size_t n = train_seqs.size();
  const int steps_per_epoch =
      static_cast<int>((n + static_cast<std::size_t>(config.batch_size) - 1) /
                       static_cast<std::size_t>(config.batch_size));
  const int total_steps = steps_per_epoch * config.max_epochs;

  Rng init_rng = Rng::stream(config.seed, "init");
  Parameters params = Parameters::init(model_config, init_rng);
  AdamW optimizer(params, AdamWConfig{0.9, 0.999, 1e-8, config.weight_decay});

  TrainLog log;
  Parameters best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  int global_step = 0;
  bool diverged = false;
  std::string divergence_detail;

  for (int epoch = 1; epoch <= config.max_epochs && !diverged; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::stream(config.seed, "shuffle", epoch);
    shuffle_rng.shuffle(order);

    double epoch_ce = 0.0;
    double epoch_reg = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      std::vector<EncodedSequence> batch;
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(train_seqs[order[k]]);
        labels.push_back(train_labels[order[k]]);
      }
      Rng dropout_rng = Rng::stream(config.seed, "dropout", global_step);
      Rng* dropout = model_config.attention_dropout > 0.0 ? &dropout_rng : nullptr;
      GradientSet gs;
      try {
        gs = compute_gradients(model_config, params, batch, labels, config.alpha, priors,
                               config.use_class_weights, entropy_options, dropout);
      } catch (const internal_error& e) {
        diverged = true;
        divergence_detail = "epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(global_step) + ": " + e.what();
        break;
      }
      epoch_ce += gs.loss.classification * static_cast<double>(batch.size());
      epoch_reg += gs.loss.regularization * static_cast<double>(batch.size());
      const double lr =
          config.learning_rate * schedule_factor(global_step, total_steps, config.warmup_fraction);
      optimizer.step(params, gs.grads, lr);
      ++global_step;
    }
    if (diverged) break;

    const EvalStats val = evaluate(model_config, params, val_seqs, val_labels, config.alpha, priors,
                                   config.use_class_weights, entropy_options, config.batch_size);
    EpochRecord record;
    record.epoch = epoch;
    record.train_classification = epoch_ce / static_cast<double>(n);
    record.train_regularization = epoch_reg / static_cast<double>(n);
    record.train_total = record.train_classification + record.train_regularization;
    record.val_total = val.total;
    record.val_classification = val.classification;
    record.val_regularization = val.regularization;
    record.val_f1_weighted = val.f1_weighted;
    record.val_f1_hate = val.f1_hate;
    log.epochs.push_back(record);

    if (val.total < best_val) {
      best_val = val.total;
      best_params = params;
      log.best_epoch = epoch;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    if (on_epoch) on_epoch(record, log);

    if (config.early_stopping && bad_epochs > config.patience) {
      log.stop_reason = "early_stopping";
      break;
    }
  }

  if (diverged) {
    log.stop_reason = "diverged";
    if (log.best_epoch == 0) {
      throw internal_error("training diverged before completing an epoch (" + divergence_detail + ")");
    }
  }
  if (log.stop_reason.empty()) log.stop_reason = "max_epochs";

  TrainResult result;
  result.log = std::move(log);
  result.checkpoint.config = model_config;
  result.checkpoint.vocab_hash = vocab.content_hash();
  result.checkpoint.params = std::move(best_params);
  return result;
}

std::vector<SeedRun> run_seeds(const ModelConfig& model_config, const TrainConfig& config,
                               const Vocabulary& vocab, const LabeledDataset& train_set,
                               const LabeledDataset& validation_set, int n_seeds,
                               const RunCallback& on_run, const EpochCallback& on_epoch) {
  if (n_seeds < 1) throw input_error("n_seeds must be >= 1");
  std::vector<SeedRun> runs;
  for (int k = 0; k < n_seeds; ++k) {
    SeedRun run;
    run.seed = config.seed + static_cast<std::uint64_t>(k);
    TrainConfig c = config;
    c.seed = run.seed;
    try {
      run.result = train(model_config, c, vocab, train_set, validation_set, on_epoch);
    } catch (const std::exception& e) {
      run.failed = true;
      run.error = e.what();
    }
    if (on_run) on_run(run);
    runs.push_back(std::move(run));
  }
  return runs;
}

SeedSummary summarize_runs(const std::vector<SeedRun>& runs) {
  SeedSummary summary;
  summary.n_runs = static_cast<int>(runs.size());
  std::vector<double> totals, f1w, f1h;
  for (const SeedRun& run : runs) {
    if (run.failed || !run.result) {
      ++summary.n_failed;
      continue;
    }
    const TrainLog& log = run.result->log;
    if (log.best_epoch < 1) continue;
    const EpochRecord& best = log.epochs[static_cast<std::size_t>(log.best_epoch - 1)];
    totals.push_back(best.val_total);
    f1w.push_back(best.val_f1_weighted);
    f1h.push_back(best.val_f1_hate);
  }
  const auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const auto sample_stddev = [&](const std::vector<double>& v) -> std::optional<double> {
    if (v.size() < 2) return std::nullopt;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  summary.mean_val_total = mean(totals);
  summary.mean_val_f1_weighted = mean(f1w);
  summary.mean_val_f1_hate = mean(f1h);
  summary.stddev_val_total = sample_stddev(totals);
  summary.stddev_val_f1_weighted = sample_stddev(f1w);
  summary.stddev_val_f1_hate = sample_stddev(f1h);
  return summary;
}

std::string SeedSummary::to_json() const {
  nlohmann::json j;
  j["n_runs"] = n_runs;
  j["n_failed"] = n_failed;
  j["mean_val_total"] = mean_val_total;
  j["mean_val_f1_weighted"] = mean_val_f1_weighted;
  j["mean_val_f1_hate"] = mean_val_f1_hate;
  j["stddev_val_total"] = stddev_val_total ? nlohmann::json(*stddev_val_total) : nlohmann::json(nullptr);
  j["stddev_val_f1_weighted"] =
      stddev_val_f1_weighted ? nlohmann::json(*stddev_val_f1_weighted) : nlohmann::json(nullptr);
  j["stddev_val_f1_hate"] =
      stddev_val_f1_hate ? nlohmann::json(*stddev_val_f1_hate) : nlohmann::json(nullptr);
  return j.dump(2) + "\n";
}

namespace {

double batch_loss_value(const ModelConfig& model_config, const Parameters& params,
                        const std::vector<EncodedSequence>& batch, const std::vector<int>& labels,
                        double alpha, const std::array<double, 2>& priors, bool use_class_weights) {
  ag::Graph graph;
  ModelGraph model(graph, model_config, params);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double ce = 0.0;
  double entropy = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    SequenceForward fwd = model.forward(batch[b]);
    ce += sample_loss(graph, fwd.logits, labels[b], priors, use_class_weights).value()(0, 0);
    if (alpha != 0.0) entropy += sequence_entropy_sum(graph, fwd).value()(0, 0);
  }
  return ce * inv_b - alpha * entropy * inv_b;
}

}  // namespace

GradcheckReport gradcheck(std::uint64_t seed, double step, double tolerance) {
  Vocabulary vocab = Vocabulary::build({"a b c d e", "a b x y"}, 1);
  std::vector<EncodedSequence> batch = {vocab.encode("a", 8), vocab.encode("b c", 8),
                                        vocab.encode("x y e", 8)};
  const std::vector<int> labels = {1, 0, 1};
  const std::array<double, 2> priors = {1.0 / 3.0, 2.0 / 3.0};

  std::vector<ModelConfig> configs(2);
  configs[0].L = 1;
  configs[0].N = 1;
  configs[0].d_m = 4;
  configs[0].d_k = 3;
  configs[0].d_v = 4;
  configs[0].d_ff = 5;
  configs[1].L = 2;
  configs[1].N = 2;
  configs[1].d_m = 8;
  configs[1].d_k = 4;
  configs[1].d_v = 4;
  configs[1].d_ff = 6;
  for (ModelConfig& c : configs) {
    c.V = vocab.size();
    c.max_len = 8;
  }

  GradcheckReport report;
  int config_index = 0;
  for (const ModelConfig& config : configs) {
    Rng rng = Rng::stream(seed, "gradcheck", config_index++);
    const Parameters params = Parameters::init(config, rng);
    for (double alpha : {0.0, 0.01, 1.0}) {
      const GradientSet analytic =
          compute_gradients(config, params, batch, labels, alpha, priors, true);
      for (const auto& [name, grad] : analytic.grads) {
        Parameters probe = params;
        Mat& tensor = probe.tensors[name];
        for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
          for (Eigen::Index j = 0; j < tensor.cols(); ++j) {
            const double saved = tensor(i, j);
            tensor(i, j) = saved + step;
            const double up =
                batch_loss_value(config, probe, batch, labels, alpha, priors, true);
            tensor(i, j) = saved - step;
            const double down =
                batch_loss_value(config, probe, batch, labels, alpha, priors, true);
            tensor(i, j) = saved;
            const double fd = (up - down) / (2.0 * step);
            const double an = grad(i, j);
            const double denom = std::max(std::abs(fd) + std::abs(an), 1e-3);
            const double rel = std::abs(fd - an) / denom;
            ++report.n_checked;
            if (rel > report.max_rel_err) {
              report.max_rel_err = rel;
              report.worst_param = name + "(" + std::to_string(i) + "," + std::to_string(j) +
                                   ") alpha=" + std::to_string(alpha);
            }
          }
        }
      }
    }
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace ear
