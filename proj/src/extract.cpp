#include "extract.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "common.hpp"

#include "json.hpp"

namespace ear {

namespace {

struct Accumulator {
  std::vector<double> layer_sum;  // summed mean-over-subtokens entropy, per layer
  std::int64_t count = 0;
  std::int64_t docs_with = 0;
  std::int64_t hateful_docs_with = 0;
};

EntropyProfile profile_for(const ModelConfig& config, const Parameters& params,
                           const EncodedSequence& seq, const EntropyOptions& options) {
  const ForwardResult fwd = model_forward(config, params, {seq});
  return entropy_profile(fwd.records[0], options);
}

}  // namespace

std::vector<TermEntropyStats> extract_overfitting_terms(const ModelConfig& config,
                                                        const Parameters& params,
                                                        const Vocabulary& vocab,
                                                        const LabeledDataset& corpus,
                                                        const ExtractOptions& options) {
  if (corpus.size() == 0) throw input_error("corpus is empty");
  if (options.min_doc_freq < 0.0 || options.min_doc_freq > 1.0) {
    throw input_error("min_doc_freq must lie in [0, 1]");
  }
  if (options.top_k < 1) throw input_error("top_k must be positive");
  const int L = config.L;

  std::map<std::string, Accumulator> acc;
  for (const LabeledExample& ex : corpus.examples) {
    // Document frequency counts the raw word, whether or not it survives
    // encoding; entropy contributions require surviving sub-token spans.
    std::set<std::string> present;
    for (const std::string& w : Vocabulary::split_words(ex.text)) present.insert(w);
    for (const std::string& w : present) {
      Accumulator& a = acc[w];
      if (a.layer_sum.empty()) a.layer_sum.assign(static_cast<std::size_t>(L), 0.0);
      a.docs_with += 1;
      a.hateful_docs_with += ex.label;
    }
    if (present.empty()) continue;

    const EncodedSequence seq = vocab.encode(ex.text, options.max_len);
    if (seq.words.empty()) continue;
    const EntropyProfile profile = profile_for(config, params, seq, options.entropy);
    for (std::size_t wi = 0; wi < seq.words.size(); ++wi) {
      const auto [begin, end] = seq.token_spans[wi];
      Accumulator& a = acc[seq.words[wi]];
      if (a.layer_sum.empty()) a.layer_sum.assign(static_cast<std::size_t>(L), 0.0);
      for (int l = 0; l < L; ++l) {
        double sum = 0.0;
        for (int t = begin; t < end; ++t) sum += profile.H[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)];
        a.layer_sum[static_cast<std::size_t>(l)] += sum / static_cast<double>(end - begin);
      }
      a.count += 1;
    }
  }

  const double n_docs = static_cast<double>(corpus.size());
  std::vector<TermEntropyStats> result;
  for (const auto& [word, a] : acc) {
    if (a.count == 0) continue;  // never survived encoding
    TermEntropyStats stats;
    stats.term = word;
    stats.count = a.count;
    stats.doc_freq = static_cast<double>(a.docs_with) / n_docs;
    if (stats.doc_freq < options.min_doc_freq) continue;
    stats.per_layer_mean.resize(static_cast<std::size_t>(L));
    double total = 0.0;
    for (int l = 0; l < L; ++l) {
      stats.per_layer_mean[static_cast<std::size_t>(l)] =
          a.layer_sum[static_cast<std::size_t>(l)] / static_cast<double>(a.count);
      total += stats.per_layer_mean[static_cast<std::size_t>(l)];
    }
    stats.mean_entropy = total / static_cast<double>(L);
    stats.hate_corr = static_cast<double>(a.hateful_docs_with) / static_cast<double>(a.docs_with);
    result.push_back(std::move(stats));
  }

  std::sort(result.begin(), result.end(), [](const TermEntropyStats& x, const TermEntropyStats& y) {
    if (x.mean_entropy != y.mean_entropy) return x.mean_entropy < y.mean_entropy;
    return x.term < y.term;
  });
  if (result.size() > static_cast<std::size_t>(options.top_k)) {
    result.resize(static_cast<std::size_t>(options.top_k));
  }
  return result;
}

TokenEntropyView profile_text(const ModelConfig& config, const Parameters& params,
                              const Vocabulary& vocab, const std::string& text, int max_len,
                              const EntropyOptions& options) {
  const EncodedSequence seq = vocab.encode(text, max_len);
  TokenEntropyView view;
  view.tokens.reserve(static_cast<std::size_t>(seq.effective_length));
  for (int i = 0; i < seq.effective_length; ++i) {
    view.tokens.push_back(vocab.token_of(seq.ids[static_cast<std::size_t>(i)]));
  }
  view.profile = profile_for(config, params, seq, options);
  view.layer_mean.assign(static_cast<std::size_t>(seq.effective_length), 0.0);
  for (int t = 0; t < seq.effective_length; ++t) {
    double sum = 0.0;
    for (int l = 0; l < config.L; ++l) {
      sum += view.profile.H[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)];
    }
    view.layer_mean[static_cast<std::size_t>(t)] = sum / static_cast<double>(config.L);
  }
  return view;
}

std::string TokenEntropyView::to_json() const {
  nlohmann::ordered_json j;
  j["tokens"] = tokens;
  j["layer_entropy"] = profile.H;
  j["layer_mean_per_token"] = layer_mean;
  j["layer_contextualization"] = profile.H_layer;
  return j.dump(2) + "\n";
}

}  // namespace ear
