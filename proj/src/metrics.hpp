#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"

namespace ear {

// AUC over a one-class sample does not exist; callers either propagate this
// or record it per term and continue.
struct undefined_auc : input_error {
  using input_error::input_error;
};

struct ScoredInstance {
  std::string id;
  double score = 0.0;  // probability of the hateful class
  int label = 0;
  std::set<std::string> term_memberships;
};

// Mann-Whitney formulation: probability a random positive outscores a random
// negative, ties credited 1/2 via midranks.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);
double roc_auc(const std::vector<ScoredInstance>& instances);

// AUC restricted to instances mentioning `term`.
double subgroup_auc(const std::vector<ScoredInstance>& instances, const std::string& term);
// AUC over hateful background (non-mention) vs non-hateful subgroup.
double bpsn_auc(const std::vector<ScoredInstance>& instances, const std::string& term);
// AUC over non-hateful background vs hateful subgroup.
double bnsp_auc(const std::vector<ScoredInstance>& instances, const std::string& term);

struct F1Pair {
  double weighted = 0.0;  // support-weighted mean of per-class F1
  double hate = 0.0;      // binary F1 of class 1
};

// Thresholds scores at `threshold`; a zero-denominator class F1 is 0 (noted
// in `warnings` when provided).
F1Pair f1_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                 double threshold = 0.5, std::vector<std::string>* warnings = nullptr);

struct TermAucs {
  std::string term;
  std::optional<double> subgroup;
  std::optional<double> bpsn;
  std::optional<double> bnsp;
  int n = 0;  // subgroup size
};

struct BiasReport {
  std::vector<TermAucs> per_term;
  // Unweighted means over the terms where the metric is defined.
  std::optional<double> mean_subgroup;
  std::optional<double> mean_bpsn;
  std::optional<double> mean_bnsp;
  double f1_weighted = 0.0;
  double f1_hate = 0.0;
  std::vector<std::string> warnings;  // undefined AUCs and F1 degeneracies

  std::string to_json() const;
  // `term,auc_subgroup,auc_bpsn,auc_bnsp,n`, undefined values left empty.
  std::string to_csv() const;
};

BiasReport bias_report(const std::vector<ScoredInstance>& instances,
                       const std::vector<std::string>& terms);

// Case-insensitive whole-token matching; multi-word terms must appear as a
// contiguous token run.
std::set<std::string> detect_memberships(const std::string& text,
                                         const std::vector<std::string>& terms);

enum class F1Metric { weighted, hate };

// One-sided bootstrap: p = fraction of resamples (size frac*n, drawn with
// replacement) where B's F1 >= A's F1. Small p supports "A is better".
double bootstrap_significance(const std::vector<double>& scores_a,
                              const std::vector<double>& scores_b,
                              const std::vector<int>& labels, F1Metric metric, int n_resamples = 1000,
                              double frac = 0.20, std::uint64_t seed = 0);

// File formats: scores `id<TAB>score<TAB>label` and membership sidecar
// `id<TAB>term`, both with a header row; term lists one term per line with
// blank lines and #-comments skipped.
std::vector<ScoredInstance> load_scores(const std::string& path);
void save_scores(const std::string& path, const std::vector<ScoredInstance>& instances);
std::vector<std::string> load_terms(const std::string& path);
void attach_memberships(std::vector<ScoredInstance>& instances, const std::string& sidecar_path);
void save_memberships(const std::string& path, const std::vector<ScoredInstance>& instances);

}  // namespace ear
