#include "synthetic.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "common.hpp"

namespace ear {

namespace {

constexpr const char* kSlot = "{}";

int count_slots(const std::string& text) {
  int count = 0;
  for (std::size_t pos = text.find(kSlot); pos != std::string::npos;
       pos = text.find(kSlot, pos + 2)) {
    ++count;
  }
  return count;
}

}  // namespace

std::vector<Template> load_templates(const std::string& path, std::vector<std::string>* warnings) {
  const std::string payload = read_file(path);
  std::istringstream in(payload);
  std::string line;
  std::vector<Template> templates;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw input_error(path + ": line " + std::to_string(line_no) + ": missing tab separator");
    }
    Template t;
    t.text = line.substr(0, tab);
    const std::string label_field = line.substr(tab + 1);
    if (label_field == "0") t.label = 0;
    else if (label_field == "1") t.label = 1;
    else {
      throw input_error(path + ": line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    const int slots = count_slots(t.text);
    if (slots != 1) {
      throw input_error(path + ": line " + std::to_string(line_no) + ": template must contain exactly one {} slot, found " +
                        std::to_string(slots));
    }
    if (!seen.insert(t.text).second && warnings != nullptr) {
      warnings->push_back(path + ": line " + std::to_string(line_no) + ": duplicate template \"" +
                          t.text + "\"");
    }
    templates.push_back(std::move(t));
  }
  if (templates.empty()) throw input_error(path + ": no templates found");
  return templates;
}

SyntheticOutput generate(const TemplateSet& set, bool allow_unbalanced,
                         std::vector<std::string>* warnings) {
  if (set.templates.empty()) throw input_error("template set is empty");
  if (set.terms.empty()) throw input_error("term list is empty");
  std::size_t hateful = 0;
  for (const Template& t : set.templates) {
    if (count_slots(t.text) != 1) {
      throw input_error("template \"" + t.text + "\" must contain exactly one {} slot");
    }
    hateful += static_cast<std::size_t>(t.label);
  }
  const std::size_t benign = set.templates.size() - hateful;
  if (hateful == 0 || benign == 0) {
    throw input_error("template set needs at least one hateful and one non-hateful template");
  }
  if (hateful != benign) {
    const std::string msg = "template labels are unbalanced (" + std::to_string(hateful) +
                            " hateful vs " + std::to_string(benign) +
                            " non-hateful); per-term 50% balance will not hold";
    if (!allow_unbalanced) throw input_error(msg);
    if (warnings != nullptr) warnings->push_back(msg);
  }

  SyntheticOutput out;
  std::size_t index = 0;
  char id_buf[32];
  for (const Template& t : set.templates) {
    const std::size_t slot = t.text.find(kSlot);
    for (const std::string& term : set.terms) {
      std::string text = t.text;
      text.replace(slot, 2, term);
      out.dataset.examples.push_back({std::move(text), t.label});
      std::snprintf(id_buf, sizeof(id_buf), "synth-%06zu", index++);
      out.ids.emplace_back(id_buf);
      out.filling_term.push_back(term);
    }
  }
  return out;
}

void SyntheticOutput::save(const std::string& dataset_path, const std::string& sidecar_path) const {
  dataset.save_tsv(dataset_path);
  std::string payload = "id\tterm\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    payload += ids[i];
    payload.push_back('\t');
    payload += filling_term[i];
    payload.push_back('\n');
  }
  write_file_atomic(sidecar_path, payload);
}

}  // namespace ear
