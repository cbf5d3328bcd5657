#pragma once

#include <string>
#include <vector>

#include "dataset.hpp"

namespace ear {

struct Template {
  std::string text;  // contains exactly one "{}" slot
  int label = 0;
};

struct TemplateSet {
  std::vector<Template> templates;
  std::vector<std::string> terms;
};

// `template<TAB>label` rows, one per line, no header. Duplicate templates
// produce warnings; a missing slot or bad label is an error naming the line.
std::vector<Template> load_templates(const std::string& path,
                                     std::vector<std::string>* warnings = nullptr);

struct SyntheticOutput {
  LabeledDataset dataset;            // synthetic split, template-major order
  std::vector<std::string> ids;      // stable per-row ids
  std::vector<std::string> filling_term;  // the term substituted into each row

  void save(const std::string& dataset_path, const std::string& sidecar_path) const;
};

// Cross product templates x terms. Balance (equal hateful and non-hateful
// template counts) is enforced unless allow_unbalanced, which downgrades the
// error to a warning; the 50/50 guarantees then no longer hold.
SyntheticOutput generate(const TemplateSet& set, bool allow_unbalanced = false,
                         std::vector<std::string>* warnings = nullptr);

}  // namespace ear
