#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ear {

// One encoded text: [CLS] + pieces + [SEP], right-padded to max_len.
struct EncodedSequence {
  std::vector<int> ids;             // length == max_len
  std::vector<int> attention_mask;  // prefix of 1s (real tokens incl. [CLS]/[SEP]), then 0s
  int effective_length = 0;         // number of mask-1 positions
  // Per surviving source word: [begin, end) positions of its pieces and the
  // word itself. Sub-word entropy averaging runs over these spans.
  std::vector<std::pair<int, int>> token_spans;
  std::vector<std::string> words;
};

// Token inventory with dense ids. The four reserved tokens occupy ids 0..3;
// corpus words follow, then sub-word pieces when merges were learned.
// Immutable after construction and safe to share across threads.
class Vocabulary {
public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kClsId = 2;
  static constexpr int kSepId = 3;
  static constexpr const char* kPad = "[PAD]";
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kCls = "[CLS]";
  static constexpr const char* kSep = "[SEP]";

  struct Options {
    int min_count = 1;
    // Number of greedy merge rules to learn for sub-word pieces; 0 keeps the
    // vocabulary word-level and folds out-of-vocabulary words to [UNK].
    int subword_merges = 0;
  };

  static Vocabulary build(const std::vector<std::string>& corpus, const Options& options);
  static Vocabulary build(const std::vector<std::string>& corpus, int min_count) {
    return build(corpus, Options{min_count, 0});
  }
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  int id_of(const std::string& token) const;  // -1 when absent
  const std::string& token_of(int id) const;
  bool is_reserved(int id) const { return id >= 0 && id < 4; }

  // FNV-1a over the saved file payload; checkpoints store it so a model is
  // never run against the wrong vocabulary.
  std::uint64_t content_hash() const;

  EncodedSequence encode(const std::string& text, int max_len) const;
  // Inverse of encode for display: drops reserved ids, rejoins pieces.
  std::string decode(const std::vector<int>& ids) const;

  // Lowercased word split shared by vocabulary building, encoding, and
  // identity-term matching: letters/digits group into words, punctuation
  // marks become single-character tokens.
  static std::vector<std::string> split_words(const std::string& text);

private:
  Vocabulary() = default;
  void add_token(const std::string& token);
  void rebuild_index();
  std::vector<std::string> pieces_of_word(const std::string& word) const;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  bool has_pieces_ = false;
  std::size_t max_piece_len_ = 0;
};

}  // namespace ear
