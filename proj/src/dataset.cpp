#include "dataset.hpp"

#include <sstream>

#include "common.hpp"

namespace ear {

namespace {
const char* kHeader = "text\tlabel";
}

LabeledDataset LabeledDataset::load_tsv(const std::string& path) {
  const std::string payload = read_file(path);
  std::istringstream in(payload);
  std::string line;
  LabeledDataset data;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kHeader) {
        throw input_error(path + ": line 1: expected header \"text\\tlabel\"");
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    // Text may itself contain tabs; the label is everything after the last one.
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw input_error(path + ": line " + std::to_string(line_no) + ": missing tab separator");
    }
    const std::string label_field = line.substr(tab + 1);
    int label;
    if (label_field == "0") {
      label = 0;
    } else if (label_field == "1") {
      label = 1;
    } else {
      throw input_error(path + ": line " + std::to_string(line_no) + ": label must be 0 or 1, got \"" +
                        label_field + "\"");
    }
    data.examples.push_back({line.substr(0, tab), label});
  }
  if (!saw_header) throw input_error(path + ": empty file, expected header \"text\\tlabel\"");
  if (data.examples.empty()) throw input_error(path + ": no data rows");
  return data;
}

void LabeledDataset::save_tsv(const std::string& path) const {
  std::string payload = kHeader;
  payload.push_back('\n');
  for (const LabeledExample& ex : examples) {
    payload += ex.text;
    payload.push_back('\t');
    payload += std::to_string(ex.label);
    payload.push_back('\n');
  }
  write_file_atomic(path, payload);
}

std::array<std::int64_t, 2> LabeledDataset::label_counts() const {
  std::array<std::int64_t, 2> counts{0, 0};
  for (const LabeledExample& ex : examples) counts[static_cast<std::size_t>(ex.label)] += 1;
  return counts;
}

std::array<double, 2> LabeledDataset::priors() const {
  if (examples.empty()) throw internal_error("priors of an empty dataset");
  const auto counts = label_counts();
  const double n = static_cast<double>(examples.size());
  return {static_cast<double>(counts[0]) / n, static_cast<double>(counts[1]) / n};
}

}  // namespace ear
