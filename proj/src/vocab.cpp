#include "vocab.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "common.hpp"

namespace ear {
namespace {

// Minimal UTF-8 handling: decode to codepoints, lowercase the ranges that
// matter for the target corpora (ASCII, Latin-1/Extended-A, Greek, Cyrillic),
// and classify into whitespace / punctuation / word characters. Anything
// unrecognized (emoji included) passes through as a word character.

std::uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  auto cont = [&](std::size_t k) { return k < s.size() && (byte(k) & 0xC0) == 0x80; };
  if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
    std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
    i += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
    std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x0F) << 12) |
                       (static_cast<std::uint32_t>(byte(i + 1) & 0x3F) << 6) | (byte(i + 2) & 0x3F);
    i += 3;
    return cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
    std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x07) << 18) |
                       (static_cast<std::uint32_t>(byte(i + 1) & 0x3F) << 12) |
                       (static_cast<std::uint32_t>(byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
    i += 4;
    return cp;
  }
  // Invalid byte: treat as Latin-1 so malformed input degrades instead of throwing.
  i += 1;
  return b0;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::uint32_t lower_codepoint(std::uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;  // Latin-1 capitals
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A1) return cp + 32;  // Greek capitals
  if (cp >= 0x3A3 && cp <= 0x3AB) return cp + 32;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;  // Cyrillic capitals
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

bool is_space_cp(std::uint32_t cp) {
  if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f') return true;
  if (cp == 0xA0 || cp == 0x3000) return true;
  if (cp >= 0x2000 && cp <= 0x200A) return true;
  return cp == 0x2028 || cp == 0x2029 || cp == 0x202F;
}

bool is_punct_cp(std::uint32_t cp) {
  if (cp < 0x80) {
    return (cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) || (cp >= 91 && cp <= 96) ||
           (cp >= 123 && cp <= 126);
  }
  switch (cp) {
    case 0xA1:    // inverted exclamation
    case 0xBF:    // inverted question
    case 0xAB:    // left guillemet
    case 0xBB:    // right guillemet
    case 0x2013:  // en dash
    case 0x2014:  // em dash
    case 0x2018:
    case 0x2019:  // single quotes
    case 0x201C:
    case 0x201D:  // double quotes
    case 0x2026:  // ellipsis
      return true;
    default:
      return false;
  }
}

std::vector<std::string> codepoints_of(const std::string& word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    std::uint32_t cp = decode_utf8(word, i);
    std::string one;
    append_utf8(one, cp);
    out.push_back(std::move(one));
  }
  return out;
}

// Number of codepoints a piece spans (its "##" marker does not count).
std::size_t piece_codepoints(const std::string& piece) {
  std::size_t start = piece.rfind("##", 0) == 0 ? 2 : 0;
  std::size_t n = 0;
  for (std::size_t i = start; i < piece.size();) {
    unsigned char b = static_cast<unsigned char>(piece[i]);
    i += (b < 0x80) ? 1 : ((b & 0xE0) == 0xC0) ? 2 : ((b & 0xF0) == 0xE0) ? 3 : 4;
    ++n;
  }
  return n;
}

}  // namespace

std::vector<std::string> Vocabulary::split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    std::uint32_t cp = lower_codepoint(decode_utf8(text, i));
    if (is_space_cp(cp)) {
      if (!current.empty()) {
        words.push_back(std::move(current));
        current.clear();
      }
    } else if (is_punct_cp(cp)) {
      if (!current.empty()) {
        words.push_back(std::move(current));
        current.clear();
      }
      std::string mark;
      append_utf8(mark, cp);
      words.push_back(std::move(mark));
    } else {
      append_utf8(current, cp);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

void Vocabulary::add_token(const std::string& token) {
  if (index_.count(token) != 0) {
    throw internal_error("duplicate vocabulary token: " + token);
  }
  index_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
}

void Vocabulary::rebuild_index() {
  index_.clear();
  has_pieces_ = false;
  max_piece_len_ = 0;
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    const std::string& token = tokens_[id];
    if (index_.count(token) != 0) {
      throw input_error("duplicate vocabulary token: " + token);
    }
    index_[token] = static_cast<int>(id);
    if (token.rfind("##", 0) == 0) has_pieces_ = true;
    max_piece_len_ = std::max(max_piece_len_, token.size());
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus, const Options& options) {
  if (corpus.empty()) throw input_error("vocabulary corpus is empty");
  if (options.min_count < 1) throw input_error("min_count must be >= 1");
  if (options.subword_merges < 0) throw input_error("subword_merges must be >= 0");

  std::map<std::string, std::int64_t> freq;  // ordered map keeps ties deterministic
  for (const std::string& text : corpus) {
    for (std::string& w : split_words(text)) freq[w] += 1;
  }

  Vocabulary vocab;
  vocab.add_token(kPad);
  vocab.add_token(kUnk);
  vocab.add_token(kCls);
  vocab.add_token(kSep);

  // Words ordered by frequency (descending) then spelling, so ids are stable
  // across runs regardless of corpus order.
  std::vector<std::pair<std::string, std::int64_t>> by_freq(freq.begin(), freq.end());
  std::stable_sort(by_freq.begin(), by_freq.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [word, count] : by_freq) {
    if (count >= options.min_count) vocab.add_token(word);
  }

  if (options.subword_merges > 0) {
    // Greedy pair merging over the full word list, frequency-weighted. Every
    // single-codepoint unit is kept too, so piece matching can always make
    // progress on characters seen in the corpus.
    std::map<std::vector<std::string>, std::int64_t> segmented;
    for (const auto& [word, count] : freq) {
      std::vector<std::string> cps = codepoints_of(word);
      std::vector<std::string> units;
      for (std::size_t k = 0; k < cps.size(); ++k) {
        units.push_back(k == 0 ? cps[k] : "##" + cps[k]);
      }
      segmented[units] += count;
    }
    std::map<std::string, std::int64_t> base_units;
    for (const auto& [units, count] : segmented) {
      for (const auto& u : units) base_units[u] += count;
    }

    for (int round = 0; round < options.subword_merges; ++round) {
      std::map<std::pair<std::string, std::string>, std::int64_t> pair_freq;
      for (const auto& [units, count] : segmented) {
        for (std::size_t k = 0; k + 1 < units.size(); ++k) {
          pair_freq[{units[k], units[k + 1]}] += count;
        }
      }
      if (pair_freq.empty()) break;
      auto best = pair_freq.begin();
      for (auto it = pair_freq.begin(); it != pair_freq.end(); ++it) {
        if (it->second > best->second) best = it;  // ties resolve to smallest pair
      }
      const auto [left, right] = best->first;
      const std::string merged = left + right.substr(2);  // right always carries "##"
      std::map<std::vector<std::string>, std::int64_t> next;
      for (const auto& [units, count] : segmented) {
        std::vector<std::string> out;
        std::size_t k = 0;
        while (k < units.size()) {
          if (k + 1 < units.size() && units[k] == left && units[k + 1] == right) {
            out.push_back(merged);
            k += 2;
          } else {
            out.push_back(units[k]);
            k += 1;
          }
        }
        next[std::move(out)] += count;
      }
      segmented = std::move(next);
    }

    std::map<std::string, std::int64_t> piece_freq = base_units;
    for (const auto& [units, count] : segmented) {
      for (const auto& u : units) piece_freq[u] += count;
    }
    std::vector<std::pair<std::string, std::int64_t>> pieces(piece_freq.begin(), piece_freq.end());
    std::stable_sort(pieces.begin(), pieces.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [piece, count] : pieces) {
      (void)count;
      if (!vocab.contains(piece)) vocab.add_token(piece);
    }
  }

  vocab.rebuild_index();
  return vocab;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) throw internal_error("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::string payload;
  for (const std::string& token : tokens_) {
    payload += token;
    payload.push_back('\n');
  }
  write_file_atomic(path, payload);
}

Vocabulary Vocabulary::load(const std::string& path) {
  const std::string payload = read_file(path);
  Vocabulary vocab;
  std::string line;
  std::istringstream in(payload);
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw input_error(path + ": line " + std::to_string(line_no) + ": empty token");
    }
    vocab.tokens_.push_back(line);
  }
  if (vocab.tokens_.size() < 4 || vocab.tokens_[0] != kPad || vocab.tokens_[1] != kUnk ||
      vocab.tokens_[2] != kCls || vocab.tokens_[3] != kSep) {
    throw input_error(path + ": vocabulary must start with [PAD] [UNK] [CLS] [SEP]");
  }
  vocab.rebuild_index();
  return vocab;
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& token : tokens_) {
    h = fnv1a(token, h);
    h = fnv1a("\n", h);
  }
  return h;
}

std::vector<std::string> Vocabulary::pieces_of_word(const std::string& word) const {
  if (index_.count(word) != 0) return {word};
  if (!has_pieces_) return {kUnk};
  // Greedy longest-match segmentation; continuation pieces carry "##".
  std::vector<std::string> cps = codepoints_of(word);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < cps.size()) {
    std::string best;
    std::string candidate = pos == 0 ? "" : "##";
    for (std::size_t end = pos; end < cps.size(); ++end) {
      candidate += cps[end];
      if (candidate.size() > max_piece_len_) break;
      if (index_.count(candidate) != 0) best = candidate;
    }
    if (best.empty()) return {kUnk};  // unseen character: whole word folds
    out.push_back(best);
    pos += piece_codepoints(best);
  }
  return out;
}

EncodedSequence Vocabulary::encode(const std::string& text, int max_len) const {
  if (max_len < 2) throw input_error("max_len must be >= 2");
  const std::vector<std::string> words = split_words(text);

  EncodedSequence seq;
  seq.ids.assign(static_cast<std::size_t>(max_len), kPadId);
  seq.attention_mask.assign(static_cast<std::size_t>(max_len), 0);
  seq.ids[0] = kClsId;
  int pos = 1;
  const int piece_budget = max_len - 2;  // room between [CLS] and [SEP]
  bool full = false;
  for (const std::string& word : words) {
    if (full) break;
    std::vector<std::string> pieces = pieces_of_word(word);
    int begin = pos;
    for (const std::string& piece : pieces) {
      if (pos - 1 >= piece_budget) {
        full = true;
        break;
      }
      seq.ids[static_cast<std::size_t>(pos)] = id_of(piece);
      ++pos;
    }
    if (pos > begin) {
      seq.token_spans.emplace_back(begin, pos);
      seq.words.push_back(word);
    }
  }
  seq.ids[static_cast<std::size_t>(pos)] = kSepId;
  ++pos;
  seq.effective_length = pos;
  for (int k = 0; k < pos; ++k) seq.attention_mask[static_cast<std::size_t>(k)] = 1;
  return seq;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (is_reserved(id)) continue;
    const std::string& token = token_of(id);
    if (token.rfind("##", 0) == 0) {
      out += token.substr(2);
    } else {
      if (!out.empty()) out.push_back(' ');
      out += token;
    }
  }
  return out;
}

}  // namespace ear
