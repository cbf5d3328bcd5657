#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "rng.hpp"
#include "vocab.hpp"

namespace ear {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw internal_error("scores/labels size mismatch");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw input_error("label must be 0 or 1");
    if (!std::isfinite(scores[i])) throw input_error("non-finite score");
    pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    throw undefined_auc("AUC undefined: sample contains only one class");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks: a tie group spanning sorted positions [i, j) all get rank
  // (i+1 + j) / 2.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double roc_auc(const std::vector<ScoredInstance>& instances) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(instances.size());
  labels.reserve(instances.size());
  for (const ScoredInstance& inst : instances) {
    scores.push_back(inst.score);
    labels.push_back(inst.label);
  }
  return roc_auc(scores, labels);
}

namespace {

bool mentions(const ScoredInstance& inst, const std::string& term) {
  return inst.term_memberships.count(term) != 0;
}

double auc_of_selection(const std::vector<ScoredInstance>& instances,
                        const std::function<std::optional<int>(const ScoredInstance&)>& role,
                        const char* what) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const ScoredInstance& inst : instances) {
    if (std::optional<int> lab = role(inst)) {
      scores.push_back(inst.score);
      labels.push_back(*lab);
    }
  }
  if (scores.empty()) throw undefined_auc(std::string("AUC undefined: ") + what + " is empty");
  try {
    return roc_auc(scores, labels);
  } catch (const undefined_auc&) {
    throw undefined_auc(std::string("AUC undefined: ") + what + " has one side empty");
  }
}

}  // namespace

double subgroup_auc(const std::vector<ScoredInstance>& instances, const std::string& term) {
  return auc_of_selection(
      instances,
      [&](const ScoredInstance& i) -> std::optional<int> {
        if (mentions(i, term)) return i.label;
        return std::nullopt;
      },
      "subgroup");
}

double bpsn_auc(const std::vector<ScoredInstance>& instances, const std::string& term) {
  return auc_of_selection(
      instances,
      [&](const ScoredInstance& i) -> std::optional<int> {
        if (!mentions(i, term) && i.label == 1) return 1;  // hateful background
        if (mentions(i, term) && i.label == 0) return 0;   // benign subgroup
        return std::nullopt;
      },
      "background-positive/subgroup-negative union");
}

double bnsp_auc(const std::vector<ScoredInstance>& instances, const std::string& term) {
  return auc_of_selection(
      instances,
      [&](const ScoredInstance& i) -> std::optional<int> {
        if (!mentions(i, term) && i.label == 0) return 0;  // benign background
        if (mentions(i, term) && i.label == 1) return 1;   // hateful subgroup
        return std::nullopt;
      },
      "background-negative/subgroup-positive union");
}

F1Pair f1_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                 double threshold, std::vector<std::string>* warnings) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw input_error("F1 needs non-empty aligned scores and labels");
  }
  // Confusion counts per class; prediction = score >= threshold.
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int pred = scores[i] >= threshold ? 1 : 0;
    if (pred == 1 && labels[i] == 1) ++tp;
    if (pred == 1 && labels[i] == 0) ++fp;
    if (pred == 0 && labels[i] == 1) ++fn;
    if (pred == 0 && labels[i] == 0) ++tn;
  }
  const auto f1_of = [&](double tp_c, double fp_c, double fn_c, const char* cls) {
    const double denom = 2.0 * tp_c + fp_c + fn_c;
    if (denom == 0.0) {
      if (warnings != nullptr) {
        warnings->push_back(std::string("F1 for class ") + cls +
                            " has a zero denominator; reported as 0");
      }
      return 0.0;
    }
    return 2.0 * tp_c / denom;
  };
  F1Pair out;
  out.hate = f1_of(static_cast<double>(tp), static_cast<double>(fp), static_cast<double>(fn), "1");
  // For class 0 the roles flip: its true positives are the true negatives.
  const double f1_neg =
      f1_of(static_cast<double>(tn), static_cast<double>(fn), static_cast<double>(fp), "0");
  const double support1 = static_cast<double>(tp + fn);
  const double support0 = static_cast<double>(tn + fp);
  out.weighted = (support0 * f1_neg + support1 * out.hate) / (support0 + support1);
  return out;
}

std::set<std::string> detect_memberships(const std::string& text,
                                         const std::vector<std::string>& terms) {
  const std::vector<std::string> tokens = Vocabulary::split_words(text);
  std::set<std::string> found;
  for (const std::string& term : terms) {
    const std::vector<std::string> term_tokens = Vocabulary::split_words(term);
    if (term_tokens.empty() || term_tokens.size() > tokens.size()) continue;
    for (std::size_t start = 0; start + term_tokens.size() <= tokens.size(); ++start) {
      if (std::equal(term_tokens.begin(), term_tokens.end(), tokens.begin() + start)) {
        found.insert(term);
        break;
      }
    }
  }
  return found;
}

BiasReport bias_report(const std::vector<ScoredInstance>& instances,
                       const std::vector<std::string>& terms) {
  if (terms.empty()) throw input_error("bias report needs a non-empty term list");
  if (instances.empty()) throw input_error("bias report needs instances");

  BiasReport report;
  double sum_sub = 0.0, sum_bpsn = 0.0, sum_bnsp = 0.0;
  int n_sub = 0, n_bpsn = 0, n_bnsp = 0;
  for (const std::string& term : terms) {
    TermAucs row;
    row.term = term;
    for (const ScoredInstance& inst : instances) {
      if (mentions(inst, term)) ++row.n;
    }
    const auto record = [&](const char* name, std::optional<double>& slot, auto&& fn) {
      try {
        slot = fn();
      } catch (const undefined_auc& e) {
        report.warnings.push_back("term \"" + term + "\": " + name + " " + e.what());
      }
    };
    record("subgroup AUC", row.subgroup, [&] { return subgroup_auc(instances, term); });
    record("BPSN AUC", row.bpsn, [&] { return bpsn_auc(instances, term); });
    record("BNSP AUC", row.bnsp, [&] { return bnsp_auc(instances, term); });
    if (row.subgroup) {
      sum_sub += *row.subgroup;
      ++n_sub;
    }
    if (row.bpsn) {
      sum_bpsn += *row.bpsn;
      ++n_bpsn;
    }
    if (row.bnsp) {
      sum_bnsp += *row.bnsp;
      ++n_bnsp;
    }
    report.per_term.push_back(std::move(row));
  }
  if (n_sub > 0) report.mean_subgroup = sum_sub / n_sub;
  if (n_bpsn > 0) report.mean_bpsn = sum_bpsn / n_bpsn;
  if (n_bnsp > 0) report.mean_bnsp = sum_bnsp / n_bnsp;

  std::vector<double> scores;
  std::vector<int> labels;
  for (const ScoredInstance& inst : instances) {
    scores.push_back(inst.score);
    labels.push_back(inst.label);
  }
  const F1Pair f1 = f1_scores(scores, labels, 0.5, &report.warnings);
  report.f1_weighted = f1.weighted;
  report.f1_hate = f1.hate;
  return report;
}

std::string BiasReport::to_json() const {
  nlohmann::json j;
  nlohmann::json rows = nlohmann::json::array();
  for (const TermAucs& row : per_term) {
    nlohmann::json r;
    r["term"] = row.term;
    r["auc_subgroup"] = row.subgroup ? nlohmann::json(*row.subgroup) : nlohmann::json(nullptr);
    r["auc_bpsn"] = row.bpsn ? nlohmann::json(*row.bpsn) : nlohmann::json(nullptr);
    r["auc_bnsp"] = row.bnsp ? nlohmann::json(*row.bnsp) : nlohmann::json(nullptr);
    r["n"] = row.n;
    rows.push_back(r);
  }
  j["per_term"] = rows;
  j["aggregates"] = {
      {"auc_subgroup", mean_subgroup ? nlohmann::json(*mean_subgroup) : nlohmann::json(nullptr)},
      {"auc_bpsn", mean_bpsn ? nlohmann::json(*mean_bpsn) : nlohmann::json(nullptr)},
      {"auc_bnsp", mean_bnsp ? nlohmann::json(*mean_bnsp) : nlohmann::json(nullptr)},
  };
  j["f1_weighted"] = f1_weighted;
  j["f1_hate"] = f1_hate;
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += "\"\"";
    else quoted.push_back(c);
  }
  quoted += "\"";
  return quoted;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string BiasReport::to_csv() const {
  std::string out = "term,auc_subgroup,auc_bpsn,auc_bnsp,n\n";
  for (const TermAucs& row : per_term) {
    out += csv_field(row.term);
    out += ",";
    out += row.subgroup ? fmt6(*row.subgroup) : "";
    out += ",";
    out += row.bpsn ? fmt6(*row.bpsn) : "";
    out += ",";
    out += row.bnsp ? fmt6(*row.bnsp) : "";
    out += ",";
    out += std::to_string(row.n);
    out += "\n";
  }
  return out;
}

double bootstrap_significance(const std::vector<double>& scores_a,
                              const std::vector<double>& scores_b,
                              const std::vector<int>& labels, F1Metric metric, int n_resamples,
                              double frac, std::uint64_t seed) {
  if (scores_a.size() != scores_b.size() || scores_a.size() != labels.size()) {
    throw input_error("bootstrap inputs must be aligned vectors over the same instances");
  }
  if (scores_a.empty()) throw input_error("bootstrap over an empty sample");
  if (n_resamples < 1) throw input_error("n_resamples must be >= 1");
  if (!(frac > 0.0 && frac <= 1.0)) throw input_error("frac must be in (0, 1]");

  const std::size_t n = scores_a.size();
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))));
  Rng rng = Rng::stream(seed, "bootstrap");
  int b_wins = 0;
  std::vector<double> sample_a(k), sample_b(k);
  std::vector<int> sample_labels(k);
  for (int r = 0; r < n_resamples; ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t idx = static_cast<std::size_t>(rng.below(n));
      sample_a[i] = scores_a[idx];
      sample_b[i] = scores_b[idx];
      sample_labels[i] = labels[idx];
    }
    const F1Pair fa = f1_scores(sample_a, sample_labels);
    const F1Pair fb = f1_scores(sample_b, sample_labels);
    const double ma = metric == F1Metric::weighted ? fa.weighted : fa.hate;
    const double mb = metric == F1Metric::weighted ? fb.weighted : fb.hate;
    if (mb >= ma) ++b_wins;
  }
  return static_cast<double>(b_wins) / static_cast<double>(n_resamples);
}

std::vector<ScoredInstance> load_scores(const std::string& path) {
  const std::string payload = read_file(path);
  std::istringstream in(payload);
  std::string line;
  std::vector<ScoredInstance> out;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "id\tscore\tlabel") {
        throw input_error(path + ": line 1: expected header \"id\\tscore\\tlabel\"");
      }
      continue;
    }
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw input_error(path + ": line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    }
    ScoredInstance inst;
    inst.id = line.substr(0, t1);
    const std::string score_field = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string label_field = line.substr(t2 + 1);
    try {
      std::size_t used = 0;
      inst.score = std::stod(score_field, &used);
      if (used != score_field.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw input_error(path + ": line " + std::to_string(line_no) + ": bad score \"" + score_field + "\"");
    }
    if (!(inst.score >= 0.0 && inst.score <= 1.0)) {
      throw input_error(path + ": line " + std::to_string(line_no) + ": score outside [0,1]");
    }
    if (label_field == "0") inst.label = 0;
    else if (label_field == "1") inst.label = 1;
    else {
      throw input_error(path + ": line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    out.push_back(std::move(inst));
  }
  if (out.empty()) throw input_error(path + ": no score rows");
  return out;
}

void save_scores(const std::string& path, const std::vector<ScoredInstance>& instances) {
  std::string payload = "id\tscore\tlabel\n";
  char buf[64];
  for (const ScoredInstance& inst : instances) {
    std::snprintf(buf, sizeof(buf), "%.10f", inst.score);
    payload += inst.id;
    payload.push_back('\t');
    payload += buf;
    payload.push_back('\t');
    payload += std::to_string(inst.label);
    payload.push_back('\n');
  }
  write_file_atomic(path, payload);
}

std::vector<std::string> load_terms(const std::string& path) {
  const std::string payload = read_file(path);
  std::istringstream in(payload);
  std::string line;
  std::vector<std::string> terms;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    terms.push_back(line);
  }
  if (terms.empty()) throw input_error(path + ": no identity terms found");
  return terms;
}

void attach_memberships(std::vector<ScoredInstance>& instances, const std::string& sidecar_path) {
  const std::string payload = read_file(sidecar_path);
  std::istringstream in(payload);
  std::string line;
  std::map<std::string, std::set<std::string>> by_id;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "id\tterm") {
        throw input_error(sidecar_path + ": line 1: expected header \"id\\tterm\"");
      }
      continue;
    }
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw input_error(sidecar_path + ": line " + std::to_string(line_no) + ": missing tab");
    }
    by_id[line.substr(0, tab)].insert(line.substr(tab + 1));
  }
  for (ScoredInstance& inst : instances) {
    auto it = by_id.find(inst.id);
    if (it != by_id.end()) inst.term_memberships = it->second;
  }
}

void save_memberships(const std::string& path, const std::vector<ScoredInstance>& instances) {
  std::string payload = "id\tterm\n";
  for (const ScoredInstance& inst : instances) {
    for (const std::string& term : inst.term_memberships) {
      payload += inst.id;
      payload.push_back('\t');
      payload += term;
      payload.push_back('\n');
    }
  }
  write_file_atomic(path, payload);
}

}  // namespace ear
