#include "runner.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "checkpoint.hpp"
#include "common.hpp"
#include "dataset.hpp"
#include "extract.hpp"
#include "metrics.hpp"
#include "synthetic.hpp"

#include "json.hpp"

namespace ear {

namespace {

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw input_error("config key " + key + ": not an integer: \"" + value + "\"");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw input_error("config key " + key + ": not a number: \"" + value + "\"");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw input_error("config key " + key + ": not a non-negative integer: \"" + value + "\"");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw input_error("config key " + key + ": expected true/false, got \"" + value + "\"");
}

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join_path(const std::string& dir, const std::string& leaf) {
  return (std::filesystem::path(dir) / leaf).string();
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += "\"\"";
    else quoted.push_back(c);
  }
  quoted.push_back('"');
  return quoted;
}

std::string fmt_fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw input_error(msg);
}

std::vector<std::string> dataset_texts(const LabeledDataset& data) {
  std::vector<std::string> texts;
  texts.reserve(data.size());
  for (const auto& ex : data.examples) texts.push_back(ex.text);
  return texts;
}

// Membership sidecar aligned row-for-row with the dataset: row i's id names
// instance i, extra rows for the same id add further terms.
void attach_aligned_memberships(std::vector<ScoredInstance>& instances,
                                const std::string& sidecar_path) {
  const std::string payload = read_file(sidecar_path);
  std::istringstream in(payload);
  std::string line;
  if (!std::getline(in, line)) throw input_error(sidecar_path + ": empty sidecar");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "id\tterm", sidecar_path + ": expected header \"id\\tterm\"");

  std::vector<std::string> order;        // distinct ids, first-appearance order
  std::map<std::string, std::set<std::string>> terms_by_id;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    require(tab != std::string::npos,
            sidecar_path + ": line " + std::to_string(line_no) + ": missing tab");
    const std::string id = line.substr(0, tab);
    if (terms_by_id.find(id) == terms_by_id.end()) order.push_back(id);
    terms_by_id[id].insert(line.substr(tab + 1));
  }
  require(order.size() == instances.size(),
          sidecar_path + ": " + std::to_string(order.size()) + " distinct ids for " +
              std::to_string(instances.size()) + " dataset rows");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    instances[i].id = order[i];
    instances[i].term_memberships = terms_by_id[order[i]];
  }
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "batch_size") train.batch_size = parse_int(key, value);
  else if (key == "learning_rate") train.learning_rate = parse_double(key, value);
  else if (key == "weight_decay") train.weight_decay = parse_double(key, value);
  else if (key == "warmup_fraction") train.warmup_fraction = parse_double(key, value);
  else if (key == "max_epochs") train.max_epochs = parse_int(key, value);
  else if (key == "patience") train.patience = parse_int(key, value);
  else if (key == "alpha") train.alpha = parse_double(key, value);
  else if (key == "seed") train.seed = parse_u64(key, value);
  else if (key == "use_class_weights") train.use_class_weights = parse_bool(key, value);
  else if (key == "max_len") {
    train.max_len = parse_int(key, value);
    model.max_len = train.max_len;
  } else if (key == "validation_fraction") train.validation_fraction = parse_double(key, value);
  else if (key == "early_stopping") train.early_stopping = parse_bool(key, value);
  else if (key == "renormalize_entropy") train.renormalize_entropy = parse_bool(key, value);
  else if (key == "L") model.L = parse_int(key, value);
  else if (key == "N") model.N = parse_int(key, value);
  else if (key == "d_m") model.d_m = parse_int(key, value);
  else if (key == "d_k") model.d_k = parse_int(key, value);
  else if (key == "d_v") model.d_v = parse_int(key, value);
  else if (key == "d_ff") model.d_ff = parse_int(key, value);
  else if (key == "attention_dropout") model.attention_dropout = parse_double(key, value);
  else if (key == "min_count") vocab.min_count = parse_int(key, value);
  else if (key == "subword_merges") vocab.subword_merges = parse_int(key, value);
  else if (key == "preset") {
    if (value != "paper-ear") throw input_error("unknown preset \"" + value + "\"");
    const TrainConfig p = TrainConfig::paper_ear();
    train.max_epochs = p.max_epochs;
    train.early_stopping = p.early_stopping;
  } else if (key == "V") {
    throw input_error("config key V is derived from the vocabulary and cannot be set");
  } else {
    throw input_error("unknown configuration key \"" + key + "\"");
  }
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> keys;
  keys["batch_size"] = std::to_string(train.batch_size);
  keys["learning_rate"] = fmt_double(train.learning_rate);
  keys["weight_decay"] = fmt_double(train.weight_decay);
  keys["warmup_fraction"] = fmt_double(train.warmup_fraction);
  keys["max_epochs"] = std::to_string(train.max_epochs);
  keys["patience"] = std::to_string(train.patience);
  keys["alpha"] = fmt_double(train.alpha);
  keys["seed"] = std::to_string(train.seed);
  keys["use_class_weights"] = train.use_class_weights ? "true" : "false";
  keys["max_len"] = std::to_string(train.max_len);
  keys["validation_fraction"] = fmt_double(train.validation_fraction);
  keys["early_stopping"] = train.early_stopping ? "true" : "false";
  keys["renormalize_entropy"] = train.renormalize_entropy ? "true" : "false";
  keys["L"] = std::to_string(model.L);
  keys["N"] = std::to_string(model.N);
  keys["d_m"] = std::to_string(model.d_m);
  keys["d_k"] = std::to_string(model.d_k);
  keys["d_v"] = std::to_string(model.d_v);
  keys["d_ff"] = std::to_string(model.d_ff);
  keys["attention_dropout"] = fmt_double(model.attention_dropout);
  keys["min_count"] = std::to_string(vocab.min_count);
  keys["subword_merges"] = std::to_string(vocab.subword_merges);
  keys["V"] = std::to_string(model.V);
  return keys;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> pairs;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw input_error(origin + ": line " + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const std::size_t e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw input_error(origin + ": line " + std::to_string(line_no) + ": empty key");
    }
    pairs.emplace_back(key, value);
  }
  return pairs;
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  return parse_config_text(read_file(path), path);
}

int thread_cap() {
  const char* env = std::getenv("EAR_NUM_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  const int cap = parse_int("EAR_NUM_THREADS", env);
  if (cap < 1) throw input_error("EAR_NUM_THREADS must be a positive integer");
  return cap;
}

void run_train(const TrainCommand& cmd, std::ostream& out) {
  (void)thread_cap();  // validate the env var up front
  require(!cmd.train_path.empty(), "training dataset path is required");
  require(!cmd.out_dir.empty(), "output directory is required");
  require(cmd.num_seeds >= 1, "number of seeds must be at least 1");
  require(file_exists(cmd.train_path), "training dataset not found: " + cmd.train_path);
  if (!cmd.val_path.empty()) {
    require(file_exists(cmd.val_path), "validation dataset not found: " + cmd.val_path);
  }

  RunConfig config;
  if (!cmd.config_path.empty()) {
    for (const auto& [k, v] : parse_config_file(cmd.config_path)) config.apply(k, v);
  }
  for (const auto& [k, v] : cmd.overrides) config.apply(k, v);

  const LabeledDataset full = LabeledDataset::load_tsv(cmd.train_path);
  LabeledDataset train_set;
  LabeledDataset val_set;
  if (!cmd.val_path.empty()) {
    train_set = full;
    val_set = LabeledDataset::load_tsv(cmd.val_path);
  } else {
    std::tie(train_set, val_set) =
        stratified_split(full, config.train.validation_fraction, config.train.seed);
  }

  // The vocabulary sees only training texts; validation stays out of it.
  const Vocabulary vocab = Vocabulary::build(dataset_texts(train_set), config.vocab);
  config.model.V = vocab.size();
  config.model.validate();
  config.train.validate();

  ensure_dir(cmd.out_dir);
  const std::string vocab_path = join_path(cmd.out_dir, "vocab.txt");
  vocab.save(vocab_path);

  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < cmd.num_seeds; ++k) seeds.push_back(config.train.seed + k);

  nlohmann::ordered_json manifest;
  manifest["tool"] = "ear";
  manifest["version"] = kToolVersion;
  manifest["created_utc"] = timestamp_utc();
  manifest["command"] = "train";
  manifest["config"] = config.resolved();
  manifest["datasets"]["train"] = {{"path", cmd.train_path},
                                   {"fnv1a", to_hex(hash_file(cmd.train_path))}};
  if (!cmd.val_path.empty()) {
    manifest["datasets"]["validation"] = {{"path", cmd.val_path},
                                          {"fnv1a", to_hex(hash_file(cmd.val_path))}};
  } else {
    manifest["datasets"]["validation"] = nullptr;
  }
  manifest["seeds"] = seeds;
  manifest["artifacts"]["vocabulary"] = vocab_path;
  manifest["artifacts"]["vocabulary_fnv1a"] = to_hex(vocab.content_hash());
  manifest["artifacts"]["summary"] = join_path(cmd.out_dir, "summary.json");
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (std::uint64_t s : seeds) {
    const std::string seed_dir = join_path(cmd.out_dir, "seed-" + std::to_string(s));
    runs.push_back({{"seed", s},
                    {"checkpoint", join_path(seed_dir, "best.ckpt")},
                    {"train_log", join_path(seed_dir, "train_log.jsonl")}});
  }
  manifest["artifacts"]["runs"] = runs;
  write_file_atomic(join_path(cmd.out_dir, "manifest.json"), manifest.dump(2) + "\n");

  struct SeedState {
    std::string dir;
    std::string partial_path;
    std::ofstream partial;
  };
  std::vector<SeedState> states;
  std::size_t next_run = 0;
  nlohmann::ordered_json run_statuses = nlohmann::ordered_json::array();
  std::vector<std::string> failures;

  for (std::uint64_t s : seeds) {
    SeedState st;
    st.dir = join_path(cmd.out_dir, "seed-" + std::to_string(s));
    ensure_dir(st.dir);
    st.partial_path = join_path(st.dir, "train_log.jsonl.partial");
    states.push_back(std::move(st));
  }
  states[0].partial.open(states[0].partial_path, std::ios::trunc);

  const auto on_epoch = [&](const EpochRecord& r, const TrainLog&) {
    SeedState& st = states[next_run];
    st.partial << r.to_json_line() << "\n" << std::flush;
    if (!cmd.quiet) {
      out << "seed " << seeds[next_run] << " epoch " << r.epoch << "/" << config.train.max_epochs
          << "  train " << fmt_fixed(r.train_total, 6) << "  val " << fmt_fixed(r.val_total, 6)
          << "  f1w " << fmt_fixed(r.val_f1_weighted, 4) << "\n";
    }
  };
  const auto on_run = [&](const SeedRun& run) {
    SeedState& st = states[next_run];
    st.partial.close();
    nlohmann::ordered_json status;
    status["seed"] = run.seed;
    if (run.failed) {
      status["status"] = "failed";
      status["error"] = run.error;
      // Keep whatever epochs were logged before the failure.
      std::error_code ec;
      std::filesystem::rename(st.partial_path, join_path(st.dir, "train_log.jsonl"), ec);
      failures.push_back("seed " + std::to_string(run.seed) + ": " + run.error);
      if (!cmd.quiet) out << "seed " << run.seed << " FAILED: " << run.error << "\n";
    } else {
      const TrainResult& result = *run.result;
      write_file_atomic(join_path(st.dir, "train_log.jsonl"), result.log.to_jsonl());
      std::filesystem::remove(st.partial_path);
      result.checkpoint.save(join_path(st.dir, "best.ckpt"));
      status["status"] = "ok";
      status["best_epoch"] = result.log.best_epoch;
      status["stop_reason"] = result.log.stop_reason;
      if (!cmd.quiet) {
        out << "seed " << run.seed << " done: best epoch " << result.log.best_epoch << ", "
            << result.log.stop_reason << "\n";
      }
    }
    run_statuses.push_back(std::move(status));
    ++next_run;
    if (next_run < states.size()) {
      states[next_run].partial.open(states[next_run].partial_path, std::ios::trunc);
    }
  };

  const std::vector<SeedRun> runs_done = run_seeds(config.model, config.train, vocab, train_set,
                                                   val_set, cmd.num_seeds, on_run, on_epoch);
  while (next_run < states.size()) {
    // run_seeds invoked the callback for every run; this only guards a
    // mismatch bug.
    states[next_run].partial.close();
    ++next_run;
  }

  const SeedSummary aggregate = summarize_runs(runs_done);
  nlohmann::ordered_json summary;
  summary["runs"] = run_statuses;
  summary["aggregate"] = nlohmann::ordered_json::parse(aggregate.to_json());
  write_file_atomic(join_path(cmd.out_dir, "summary.json"), summary.dump(2) + "\n");

  if (!failures.empty()) {
    std::string msg = "training failed for " + std::to_string(failures.size()) + " of " +
                      std::to_string(seeds.size()) + " seeds: ";
    for (std::size_t i = 0; i < failures.size(); ++i) {
      if (i > 0) msg += "; ";
      msg += failures[i];
    }
    throw internal_error(msg);
  }
}

void run_eval(const EvalCommand& cmd, std::ostream& out) {
  (void)thread_cap();
  require(!cmd.checkpoint_path.empty(), "checkpoint path is required");
  require(!cmd.vocab_path.empty(), "vocabulary path is required");
  require(!cmd.data_path.empty(), "dataset path is required");
  require(!cmd.terms_path.empty(), "identity-term list path is required");
  require(!cmd.out_dir.empty(), "output directory is required");
  require(cmd.batch_size >= 1, "batch size must be at least 1");
  require(file_exists(cmd.data_path), "dataset not found: " + cmd.data_path);

  const Checkpoint ckpt = Checkpoint::load(cmd.checkpoint_path);
  const Vocabulary vocab = Vocabulary::load(cmd.vocab_path);
  if (vocab.content_hash() != ckpt.vocab_hash) {
    throw input_error("vocabulary " + cmd.vocab_path + " does not match the checkpoint (hash " +
                      to_hex(vocab.content_hash()) + " vs " + to_hex(ckpt.vocab_hash) + ")");
  }
  const LabeledDataset data = LabeledDataset::load_tsv(cmd.data_path);
  require(data.size() > 0, cmd.data_path + ": dataset is empty");
  const std::vector<std::string> terms = load_terms(cmd.terms_path);

  std::vector<ScoredInstance> instances(data.size());
  char id_buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(id_buf, sizeof(id_buf), "row-%06zu", i);
    instances[i].id = id_buf;
    instances[i].label = data.examples[i].label;
  }

  for (std::size_t begin = 0; begin < data.size(); begin += static_cast<std::size_t>(cmd.batch_size)) {
    const std::size_t end = std::min(data.size(), begin + static_cast<std::size_t>(cmd.batch_size));
    std::vector<EncodedSequence> batch;
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(vocab.encode(data.examples[i].text, ckpt.config.max_len));
    }
    const ForwardResult fwd = model_forward(ckpt.config, ckpt.params, batch);
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::RowVectorXd probs =
          softmax_row(fwd.logits.row(static_cast<Eigen::Index>(i - begin)));
      instances[i].score = probs(1);
    }
  }

  if (!cmd.memberships_path.empty()) {
    attach_aligned_memberships(instances, cmd.memberships_path);
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      instances[i].term_memberships = detect_memberships(data.examples[i].text, terms);
    }
  }

  ensure_dir(cmd.out_dir);
  save_scores(join_path(cmd.out_dir, "scores.tsv"), instances);
  save_memberships(join_path(cmd.out_dir, "memberships.tsv"), instances);

  const BiasReport report = bias_report(instances, terms);
  write_file_atomic(join_path(cmd.out_dir, "report.csv"), report.to_csv());

  std::string report_json = report.to_json();
  if (!cmd.baseline_scores_path.empty()) {
    const std::vector<ScoredInstance> baseline = load_scores(cmd.baseline_scores_path);
    require(baseline.size() == instances.size(),
            cmd.baseline_scores_path + ": " + std::to_string(baseline.size()) +
                " scores for " + std::to_string(instances.size()) + " instances");
    std::vector<double> ours(instances.size());
    std::vector<double> theirs(instances.size());
    std::vector<int> labels(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
      require(baseline[i].label == instances[i].label,
              cmd.baseline_scores_path + ": label mismatch at row " + std::to_string(i));
      ours[i] = instances[i].score;
      theirs[i] = baseline[i].score;
      labels[i] = instances[i].label;
    }
    const double p_weighted =
        bootstrap_significance(ours, theirs, labels, F1Metric::weighted, cmd.bootstrap_samples,
                               cmd.bootstrap_fraction, cmd.seed);
    const double p_hate = bootstrap_significance(ours, theirs, labels, F1Metric::hate,
                                                 cmd.bootstrap_samples, cmd.bootstrap_fraction,
                                                 cmd.seed);
    const F1Pair base_f1 = f1_scores(theirs, labels);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(report_json);
    j["significance"] = {{"baseline", cmd.baseline_scores_path},
                         {"n_resamples", cmd.bootstrap_samples},
                         {"sample_fraction", cmd.bootstrap_fraction},
                         {"seed", cmd.seed},
                         {"baseline_f1_weighted", base_f1.weighted},
                         {"baseline_f1_hate", base_f1.hate},
                         {"p_baseline_geq_ours_f1_weighted", p_weighted},
                         {"p_baseline_geq_ours_f1_hate", p_hate}};
    report_json = j.dump(2) + "\n";
  }
  write_file_atomic(join_path(cmd.out_dir, "report.json"), report_json);

  if (!cmd.quiet) {
    out << "scored " << instances.size() << " instances; f1_weighted "
        << fmt_fixed(report.f1_weighted, 4) << ", f1_hate " << fmt_fixed(report.f1_hate, 4);
    if (report.mean_subgroup) out << ", mean subgroup AUC " << fmt_fixed(*report.mean_subgroup, 4);
    out << "\n";
    if (!report.warnings.empty()) {
      out << report.warnings.size() << " metric warning(s); see report.json\n";
    }
  }
}

void run_extract(const ExtractCommand& cmd, std::ostream& out) {
  (void)thread_cap();
  require(!cmd.checkpoint_path.empty(), "checkpoint path is required");
  require(!cmd.vocab_path.empty(), "vocabulary path is required");
  require(!cmd.data_path.empty(), "dataset path is required");
  require(!cmd.out_csv_path.empty(), "output CSV path is required");
  require(file_exists(cmd.data_path), "dataset not found: " + cmd.data_path);

  const Checkpoint ckpt = Checkpoint::load(cmd.checkpoint_path);
  const Vocabulary vocab = Vocabulary::load(cmd.vocab_path);
  if (vocab.content_hash() != ckpt.vocab_hash) {
    throw input_error("vocabulary " + cmd.vocab_path + " does not match the checkpoint (hash " +
                      to_hex(vocab.content_hash()) + " vs " + to_hex(ckpt.vocab_hash) + ")");
  }
  const LabeledDataset corpus = LabeledDataset::load_tsv(cmd.data_path);

  ExtractOptions options;
  options.min_doc_freq = cmd.min_doc_freq;
  options.top_k = cmd.top_k;
  options.max_len = ckpt.config.max_len;
  const std::vector<TermEntropyStats> stats =
      extract_overfitting_terms(ckpt.config, ckpt.params, vocab, corpus, options);

  std::string csv = "term,mean_entropy,count,doc_freq,hate_corr\n";
  for (const TermEntropyStats& s : stats) {
    csv += csv_cell(s.term);
    csv += "," + fmt_fixed(s.mean_entropy, 6);
    csv += "," + std::to_string(s.count);
    csv += "," + fmt_fixed(s.doc_freq, 6);
    csv += ",";
    if (s.hate_corr) csv += fmt_fixed(*s.hate_corr, 6);
    csv.push_back('\n');
  }
  write_file_atomic(cmd.out_csv_path, csv);

  if (!cmd.out_json_path.empty()) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const TermEntropyStats& s : stats) {
      nlohmann::ordered_json row;
      row["term"] = s.term;
      row["mean_entropy"] = s.mean_entropy;
      row["per_layer_mean"] = s.per_layer_mean;  // last-layer view is the final entry
      row["count"] = s.count;
      row["doc_freq"] = s.doc_freq;
      if (s.hate_corr) row["hate_corr"] = *s.hate_corr;
      else row["hate_corr"] = nullptr;
      rows.push_back(std::move(row));
    }
    j["terms"] = rows;
    write_file_atomic(cmd.out_json_path, j.dump(2) + "\n");
  }

  if (!cmd.quiet) {
    out << "extracted " << stats.size() << " term(s)";
    if (!stats.empty()) {
      out << "; lowest entropy: " << stats.front().term << " ("
          << fmt_fixed(stats.front().mean_entropy, 4) << ")";
    }
    out << "\n";
  }
}

void run_gen_synthetic(const GenSyntheticCommand& cmd, std::ostream& out) {
  require(!cmd.templates_path.empty(), "template file path is required");
  require(!cmd.terms_path.empty(), "identity-term list path is required");
  require(!cmd.out_data_path.empty(), "output dataset path is required");
  require(!cmd.out_memberships_path.empty(), "output membership sidecar path is required");

  std::vector<std::string> warnings;
  TemplateSet set;
  set.templates = load_templates(cmd.templates_path, &warnings);
  set.terms = load_terms(cmd.terms_path);
  const SyntheticOutput result = generate(set, cmd.allow_unbalanced, &warnings);
  result.save(cmd.out_data_path, cmd.out_memberships_path);

  if (!cmd.quiet) {
    for (const std::string& w : warnings) out << "warning: " << w << "\n";
    const auto counts = result.dataset.label_counts();
    out << "generated " << result.dataset.size() << " instances (" << counts[1] << " hateful, "
        << counts[0] << " non-hateful) from " << set.templates.size() << " templates x "
        << set.terms.size() << " terms\n";
  }
}

void run_gradcheck(const GradcheckCommand& cmd, std::ostream& out, double* max_rel_err) {
  const GradcheckReport report = gradcheck(cmd.seed, cmd.step, cmd.tolerance);
  if (max_rel_err != nullptr) *max_rel_err = report.max_rel_err;
  std::ostringstream line;
  line << "max relative error " << std::scientific << std::setprecision(3) << report.max_rel_err
       << " over " << report.n_checked << " gradient entries (worst: " << report.worst_param
       << ")";
  out << line.str() << "\n";
  if (!report.pass) {
    throw internal_error("gradient check failed: " + line.str());
  }
}

int run_command(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return 0;
  } catch (const input_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ear
