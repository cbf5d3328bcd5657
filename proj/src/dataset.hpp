#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ear {

struct LabeledExample {
  std::string text;
  int label = 0;  // 0 = non-hateful, 1 = hateful
};

// Rows of `text<TAB>label` with class priors. Row order is preserved from the
// source file; shuffling is the trainer's job.
struct LabeledDataset {
  std::vector<LabeledExample> examples;

  static LabeledDataset load_tsv(const std::string& path);
  void save_tsv(const std::string& path) const;

  std::size_t size() const { return examples.size(); }
  // Empirical class priors {p(label=0), p(label=1)}; they sum to 1.
  std::array<double, 2> priors() const;
  std::array<std::int64_t, 2> label_counts() const;
};

}  // namespace ear
