#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "vocab.hpp"

namespace ear {

// Aggregate contextualization statistics for one surface word across a corpus.
struct TermEntropyStats {
  std::string term;
  double mean_entropy = 0.0;                // averaged over layers and occurrences
  std::vector<double> per_layer_mean;       // one entry per encoder layer
  std::int64_t count = 0;                   // token occurrences contributing entropy
  double doc_freq = 0.0;                    // fraction of documents containing the word
  std::optional<double> hate_corr;          // P(label=1 | document contains the word)
};

struct ExtractOptions {
  double min_doc_freq = 0.01;
  int top_k = 50;
  int max_len = 120;
  EntropyOptions entropy;
};

// Ranks corpus words by ascending attention entropy. Words a model attends to
// narrowly (low entropy) in many documents are overfitting candidates.
std::vector<TermEntropyStats> extract_overfitting_terms(const ModelConfig& config,
                                                        const Parameters& params,
                                                        const Vocabulary& vocab,
                                                        const LabeledDataset& corpus,
                                                        const ExtractOptions& options = {});

// Per-token entropy trace for a single text, for inspection tooling.
struct TokenEntropyView {
  std::vector<std::string> tokens;          // real tokens incl [CLS]/[SEP]
  EntropyProfile profile;
  std::vector<double> layer_mean;           // per token, averaged over layers
  std::string to_json() const;
};

TokenEntropyView profile_text(const ModelConfig& config, const Parameters& params,
                              const Vocabulary& vocab, const std::string& text,
                              int max_len = 120, const EntropyOptions& options = {});

}  // namespace ear
