// Command-line front end. Flag parsing only; all behavior lives behind the
// C API so the binary exercises exactly what library consumers get.
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ear/ear.h"

namespace {

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int report(int code) {
  if (code != EAR_OK) {
    std::fprintf(stderr, "%s: %s\n", code == EAR_ERR_INPUT ? "error" : "internal error",
                 ear_last_error());
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer text classifier with entropy-based attention regularization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ear_version()));

  // train
  std::string tr_config, tr_train, tr_val, tr_out;
  std::vector<std::string> tr_sets;
  int tr_seeds = 1;
  bool tr_quiet = false;
  CLI::App* train = app.add_subcommand("train", "Train one or more seeded runs");
  train->add_option("--config", tr_config, "key=value configuration file");
  train->add_option("--train", tr_train, "training dataset TSV (text<TAB>label)")->required();
  train->add_option("--val", tr_val, "validation dataset TSV (default: stratified split)");
  train->add_option("--out-dir", tr_out, "run directory for all artifacts")->required();
  train->add_option("--seeds", tr_seeds, "number of consecutive seeds to train")
      ->check(CLI::PositiveNumber);
  train->add_option("--set", tr_sets, "config override key=value (repeatable, after --config)");
  train->add_flag("--quiet", tr_quiet, "suppress progress lines");
  // Common knobs as first-class flags; they fold into --set order-sensitively.
  for (const char* key : {"alpha", "seed", "max-epochs", "batch-size", "learning-rate",
                          "max-len", "preset"}) {
    std::string dashed = key;
    std::string underscored = key;
    for (char& c : underscored) {
      if (c == '-') c = '_';
    }
    train
        ->add_option_function<std::string>(
            "--" + dashed,
            [&tr_sets, underscored](const std::string& v) {
              tr_sets.push_back(underscored + "=" + v);
            },
            "shorthand for --set " + underscored + "=<value>")
        ->type_name("VALUE");
  }

  // eval
  std::string ev_ckpt, ev_vocab, ev_data, ev_terms, ev_out, ev_members, ev_baseline;
  int ev_batch = 64;
  int ev_boot_n = 1000;
  double ev_boot_frac = 0.20;
  unsigned long long ev_seed = 0;
  bool ev_quiet = false;
  CLI::App* eval = app.add_subcommand("eval", "Score a dataset and compute bias metrics");
  eval->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  eval->add_option("--vocab", ev_vocab, "vocabulary file saved at training time")->required();
  eval->add_option("--data", ev_data, "evaluation dataset TSV")->required();
  eval->add_option("--terms", ev_terms, "identity-term list, one per line")->required();
  eval->add_option("--out-dir", ev_out, "output directory")->required();
  eval->add_option("--memberships", ev_members,
                   "membership sidecar aligned with the dataset (default: detect from text)");
  eval->add_option("--baseline-scores", ev_baseline,
                   "baseline scores TSV; adds bootstrap F1 significance");
  eval->add_option("--batch-size", ev_batch, "forward-pass chunk size")
      ->check(CLI::PositiveNumber);
  eval->add_option("--bootstrap-n", ev_boot_n, "bootstrap resamples")->check(CLI::PositiveNumber);
  eval->add_option("--bootstrap-frac", ev_boot_frac, "bootstrap sample fraction");
  eval->add_option("--seed", ev_seed, "bootstrap seed");
  eval->add_flag("--quiet", ev_quiet, "suppress the summary line");

  // extract-terms
  std::string ex_ckpt, ex_vocab, ex_data, ex_csv, ex_json;
  double ex_min_df = 0.01;
  int ex_top_k = 50;
  bool ex_quiet = false;
  CLI::App* extract =
      app.add_subcommand("extract-terms", "Rank corpus words by ascending attention entropy");
  extract->add_option("--checkpoint", ex_ckpt, "model checkpoint")->required();
  extract->add_option("--vocab", ex_vocab, "vocabulary file")->required();
  extract->add_option("--data", ex_data, "corpus TSV")->required();
  extract->add_option("--out", ex_csv, "output CSV path")->required();
  extract->add_option("--json", ex_json, "optional JSON output with the per-layer view");
  extract->add_option("--min-df", ex_min_df, "minimum document frequency (default 0.01)");
  extract->add_option("--top-k", ex_top_k, "number of terms to keep")
      ->check(CLI::PositiveNumber);
  extract->add_flag("--quiet", ex_quiet, "suppress the summary line");

  // gen-synthetic
  std::string gs_templates, gs_terms, gs_data, gs_members;
  bool gs_unbalanced = false;
  bool gs_quiet = false;
  CLI::App* gen = app.add_subcommand("gen-synthetic",
                                     "Cross templates with identity terms into a test set");
  gen->add_option("--templates", gs_templates, "template TSV (template<TAB>label)")->required();
  gen->add_option("--terms", gs_terms, "identity-term list, one per line")->required();
  gen->add_option("--out-data", gs_data, "output dataset TSV")->required();
  gen->add_option("--out-memberships", gs_members, "output membership sidecar")->required();
  gen->add_flag("--allow-unbalanced", gs_unbalanced,
                "accept label-unbalanced template sets (warns instead of failing)");
  gen->add_flag("--quiet", gs_quiet, "suppress the summary line");

  // gradcheck
  unsigned long long gc_seed = 0;
  double gc_step = 1e-5;
  double gc_tol = 1e-4;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Verify gradients against finite differences");
  gradcheck->add_option("--seed", gc_seed, "random seed for the probe model");
  gradcheck->add_option("--step", gc_step, "finite-difference step");
  gradcheck->add_option("--tolerance", gc_tol, "max allowed relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    // CLI11 returns 0 for --help/--version; anything else is a usage error.
    return rc == 0 ? 0 : EAR_ERR_INPUT;
  }

  if (*train) {
    std::string overrides;
    for (const std::string& kv : tr_sets) overrides += kv + "\n";
    ear_train_options o{};
    o.config_path = or_null(tr_config);
    o.overrides = overrides.empty() ? nullptr : overrides.c_str();
    o.train_path = tr_train.c_str();
    o.val_path = or_null(tr_val);
    o.out_dir = tr_out.c_str();
    o.num_seeds = tr_seeds;
    o.quiet = tr_quiet ? 1 : 0;
    return report(ear_cmd_train(&o));
  }
  if (*eval) {
    ear_eval_options o{};
    o.checkpoint_path = ev_ckpt.c_str();
    o.vocab_path = ev_vocab.c_str();
    o.data_path = ev_data.c_str();
    o.terms_path = ev_terms.c_str();
    o.out_dir = ev_out.c_str();
    o.memberships_path = or_null(ev_members);
    o.baseline_scores_path = or_null(ev_baseline);
    o.batch_size = ev_batch;
    o.bootstrap_samples = ev_boot_n;
    o.bootstrap_fraction = ev_boot_frac;
    o.seed = ev_seed;
    o.quiet = ev_quiet ? 1 : 0;
    return report(ear_cmd_eval(&o));
  }
  if (*extract) {
    ear_extract_options o{};
    o.checkpoint_path = ex_ckpt.c_str();
    o.vocab_path = ex_vocab.c_str();
    o.data_path = ex_data.c_str();
    o.out_csv_path = ex_csv.c_str();
    o.out_json_path = or_null(ex_json);
    o.min_doc_freq = ex_min_df;
    o.top_k = ex_top_k;
    o.quiet = ex_quiet ? 1 : 0;
    return report(ear_cmd_extract_terms(&o));
  }
  if (*gen) {
    ear_gen_synthetic_options o{};
    o.templates_path = gs_templates.c_str();
    o.terms_path = gs_terms.c_str();
    o.out_data_path = gs_data.c_str();
    o.out_memberships_path = gs_members.c_str();
    o.allow_unbalanced = gs_unbalanced ? 1 : 0;
    o.quiet = gs_quiet ? 1 : 0;
    return report(ear_cmd_gen_synthetic(&o));
  }
  ear_gradcheck_options o{};
  o.seed = gc_seed;
  o.step = gc_step;
  o.tolerance = gc_tol;
  return report(ear_cmd_gradcheck(&o, nullptr));
}
