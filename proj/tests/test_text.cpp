#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "vocab.hpp"

using ear::EncodedSequence;
using ear::LabeledDataset;
using ear::Vocabulary;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("word splitting lowercases and isolates punctuation") {
  CHECK(Vocabulary::split_words("I hate you") == std::vector<std::string>{"i", "hate", "you"});
  CHECK(Vocabulary::split_words("Hello, world!") ==
        std::vector<std::string>{"hello", ",", "world", "!"});
  CHECK(Vocabulary::split_words("  spaced\tout\n") == std::vector<std::string>{"spaced", "out"});
  CHECK(Vocabulary::split_words("") == std::vector<std::string>{});
  CHECK(Vocabulary::split_words("ÀÉßÑ") == std::vector<std::string>{"àéßñ"});
  CHECK(Vocabulary::split_words("ПРИВЕТ") == std::vector<std::string>{"привет"});
  // Emoji pass through as word characters.
  CHECK(Vocabulary::split_words("ok \xF0\x9F\x98\x80") ==
        std::vector<std::string>{"ok", "\xF0\x9F\x98\x80"});
}

TEST_CASE("vocabulary size matches the reserved-plus-frequency contract") {
  // ["a b", "a"]: tokens a(2), b(1). min_count=1 keeps both: 4 reserved + 2.
  Vocabulary v1 = Vocabulary::build({"a b", "a"}, 1);
  CHECK(v1.size() == 6);
  CHECK(v1.id_of("a") == 4);  // higher frequency sorts first
  CHECK(v1.id_of("b") == 5);

  // min_count=2 drops b: 4 reserved + 1.
  Vocabulary v2 = Vocabulary::build({"a b", "a"}, 2);
  CHECK(v2.size() == 5);
  CHECK(v2.id_of("b") == -1);

  CHECK(v1.id_of("[PAD]") == 0);
  CHECK(v1.id_of("[UNK]") == 1);
  CHECK(v1.id_of("[CLS]") == 2);
  CHECK(v1.id_of("[SEP]") == 3);

  CHECK_THROWS_AS(Vocabulary::build({}, 1), ear::input_error);
  CHECK_THROWS_AS(Vocabulary::build({"a"}, 0), ear::input_error);
}

TEST_CASE("encoding wraps with [CLS]/[SEP] and right-pads") {
  Vocabulary v = Vocabulary::build({"i hate you", "i like you"}, 1);

  EncodedSequence seq = v.encode("i hate you", 8);
  CHECK(seq.effective_length == 5);
  CHECK(seq.ids.size() == 8);
  CHECK(seq.ids[0] == Vocabulary::kClsId);
  CHECK(seq.ids[1] == v.id_of("i"));
  CHECK(seq.ids[2] == v.id_of("hate"));
  CHECK(seq.ids[3] == v.id_of("you"));
  CHECK(seq.ids[4] == Vocabulary::kSepId);
  CHECK(seq.ids[5] == Vocabulary::kPadId);
  CHECK(seq.ids[6] == Vocabulary::kPadId);
  CHECK(seq.ids[7] == Vocabulary::kPadId);
  CHECK(seq.attention_mask == std::vector<int>{1, 1, 1, 1, 1, 0, 0, 0});
  REQUIRE(seq.token_spans.size() == 3);
  CHECK(seq.token_spans[0] == std::pair<int, int>{1, 2});
  CHECK(seq.token_spans[2] == std::pair<int, int>{3, 4});
  CHECK(seq.words == std::vector<std::string>{"i", "hate", "you"});

  EncodedSequence empty = v.encode("", 6);
  CHECK(empty.effective_length == 2);
  CHECK(empty.ids[0] == Vocabulary::kClsId);
  CHECK(empty.ids[1] == Vocabulary::kSepId);
  CHECK(empty.ids[2] == Vocabulary::kPadId);
  CHECK(empty.token_spans.empty());

  // Unknown words fold to [UNK] when no sub-word pieces exist.
  EncodedSequence unk = v.encode("i despise you", 8);
  CHECK(unk.ids[2] == Vocabulary::kUnkId);
  CHECK(unk.effective_length == 5);

  CHECK_THROWS_AS(v.encode("x", 1), ear::input_error);
}

TEST_CASE("truncation keeps leading tokens and always retains [SEP]") {
  Vocabulary v = Vocabulary::build({"a b c d e f g"}, 1);
  EncodedSequence seq = v.encode("a b c d e f g", 5);
  CHECK(seq.effective_length == 5);
  CHECK(seq.ids[0] == Vocabulary::kClsId);
  CHECK(seq.ids[1] == v.id_of("a"));
  CHECK(seq.ids[2] == v.id_of("b"));
  CHECK(seq.ids[3] == v.id_of("c"));
  CHECK(seq.ids[4] == Vocabulary::kSepId);
  CHECK(seq.token_spans.size() == 3);
}

TEST_CASE("decode inverts encode for in-vocabulary text") {
  Vocabulary v = Vocabulary::build({"i hate you", "hello , world !"}, 1);
  for (const std::string& text : {std::string("i hate you"), std::string("Hello, world!")}) {
    EncodedSequence seq = v.encode(text, 16);
    std::string joined;
    for (const std::string& w : Vocabulary::split_words(text)) {
      if (!joined.empty()) joined.push_back(' ');
      joined += w;
    }
    CHECK(v.decode(seq.ids) == joined);
  }
}

TEST_CASE("sub-word pieces segment unseen words and spans group them") {
  Vocabulary v = Vocabulary::build({"hunting hunter hunted printing printer"},
                                   Vocabulary::Options{1, 40});
  // Every full word is still a single token.
  CHECK(v.id_of("hunting") >= 4);
  // A novel word made of seen characters segments into pieces, not [UNK].
  EncodedSequence seq = v.encode("printed", 16);
  REQUIRE(seq.token_spans.size() == 1);
  auto [begin, end] = seq.token_spans[0];
  CHECK(end - begin >= 2);  // several pieces
  for (int pos = begin; pos < end; ++pos) {
    CHECK(seq.ids[pos] != Vocabulary::kUnkId);
  }
  CHECK(v.decode(seq.ids) == "printed");

  // A word with an unseen character still folds to [UNK].
  EncodedSequence unk = v.encode("prinz", 16);
  CHECK(unk.ids[1] == Vocabulary::kUnkId);
}

TEST_CASE("vocabulary save/load round-trip preserves ids and hash") {
  Vocabulary v = Vocabulary::build({"alpha beta gamma alpha"}, Vocabulary::Options{1, 8});
  const std::string path = temp_path("ear_vocab_test.txt");
  v.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  CHECK(loaded.id_of("alpha") == v.id_of("alpha"));
  CHECK(loaded.content_hash() == v.content_hash());
  EncodedSequence a = v.encode("alpha beta", 8);
  EncodedSequence b = loaded.encode("alpha beta", 8);
  CHECK(a.ids == b.ids);
  std::remove(path.c_str());

  const std::string bad = temp_path("ear_vocab_bad.txt");
  ear::write_file_atomic(bad, "alpha\nbeta\n");
  CHECK_THROWS_AS(Vocabulary::load(bad), ear::input_error);
  std::remove(bad.c_str());
}

TEST_CASE("dataset TSV loads rows, labels, and priors") {
  const std::string path = temp_path("ear_dataset_test.tsv");
  ear::write_file_atomic(path, "text\tlabel\nyou are kind\t0\ni hate you\t1\nstay away\t1\n");
  LabeledDataset data = LabeledDataset::load_tsv(path);
  REQUIRE(data.size() == 3);
  CHECK(data.examples[0].text == "you are kind");
  CHECK(data.examples[0].label == 0);
  CHECK(data.examples[2].label == 1);
  auto priors = data.priors();
  CHECK(priors[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(priors[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(priors[0] + priors[1] - 1.0) < 1e-12);

  // Tab inside the text: label is after the last tab.
  ear::write_file_atomic(path, "text\tlabel\na\tb\t1\n");
  LabeledDataset tabbed = LabeledDataset::load_tsv(path);
  CHECK(tabbed.examples[0].text == "a\tb");
  CHECK(tabbed.examples[0].label == 1);

  // Round-trip.
  const std::string out = temp_path("ear_dataset_out.tsv");
  data.save_tsv(out);
  LabeledDataset back = LabeledDataset::load_tsv(out);
  CHECK(back.size() == data.size());
  CHECK(back.examples[1].text == data.examples[1].text);
  std::remove(out.c_str());

  ear::write_file_atomic(path, "wrong\theader\nx\t1\n");
  CHECK_THROWS_AS(LabeledDataset::load_tsv(path), ear::input_error);
  ear::write_file_atomic(path, "text\tlabel\nno tab here\n");
  CHECK_THROWS_WITH_AS(LabeledDataset::load_tsv(path),
                       doctest::Contains("line 2"), ear::input_error);
  ear::write_file_atomic(path, "text\tlabel\nx\t2\n");
  CHECK_THROWS_WITH_AS(LabeledDataset::load_tsv(path),
                       doctest::Contains("label"), ear::input_error);
  ear::write_file_atomic(path, "text\tlabel\n");
  CHECK_THROWS_AS(LabeledDataset::load_tsv(path), ear::input_error);
  std::remove(path.c_str());
}
