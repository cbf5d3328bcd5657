#include "ear/ear.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <utility>

#include "checkpoint.hpp"
#include "common.hpp"
#include "extract.hpp"
#include "model.hpp"
#include "runner.hpp"
#include "vocab.hpp"

namespace {

thread_local std::string g_last_error;

template <typename F>
int guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return EAR_OK;
  } catch (const ear::input_error& e) {
    g_last_error = e.what();
    return EAR_ERR_INPUT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EAR_ERR_INTERNAL;
  }
}

int input_fail(const char* msg) {
  g_last_error = msg;
  return EAR_ERR_INPUT;
}

std::string or_empty(const char* s) { return s == nullptr ? std::string() : std::string(s); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

struct ear_model {
  ear::Checkpoint ckpt;
  ear::Vocabulary vocab;
};

extern "C" {

const char* ear_version(void) { return ear::kToolVersion; }

const char* ear_last_error(void) { return g_last_error.c_str(); }

void ear_string_free(char* s) { std::free(s); }

int ear_model_open(const char* checkpoint_path, const char* vocab_path, ear_model** out) {
  if (checkpoint_path == nullptr || vocab_path == nullptr || out == nullptr) {
    return input_fail("ear_model_open: null argument");
  }
  *out = nullptr;
  return guarded([&] {
    ear::Checkpoint ckpt = ear::Checkpoint::load(checkpoint_path);
    ear::Vocabulary vocab = ear::Vocabulary::load(vocab_path);
    if (vocab.content_hash() != ckpt.vocab_hash) {
      throw ear::input_error(std::string("vocabulary ") + vocab_path +
                             " does not match the checkpoint (hash " +
                             ear::to_hex(vocab.content_hash()) + " vs " +
                             ear::to_hex(ckpt.vocab_hash) + ")");
    }
    *out = new ear_model{std::move(ckpt), std::move(vocab)};
  });
}

void ear_model_close(ear_model* model) { delete model; }

int ear_model_score(ear_model* model, const char* text, double* hate_probability) {
  if (model == nullptr || text == nullptr || hate_probability == nullptr) {
    return input_fail("ear_model_score: null argument");
  }
  return guarded([&] {
    const ear::EncodedSequence seq = model->vocab.encode(text, model->ckpt.config.max_len);
    const ear::ForwardResult fwd =
        ear::model_forward(model->ckpt.config, model->ckpt.params, {seq});
    *hate_probability = ear::softmax_row(fwd.logits.row(0))(1);
  });
}

int ear_model_profile_json(ear_model* model, const char* text, char** json_out) {
  if (model == nullptr || text == nullptr || json_out == nullptr) {
    return input_fail("ear_model_profile_json: null argument");
  }
  *json_out = nullptr;
  return guarded([&] {
    const ear::TokenEntropyView view = ear::profile_text(
        model->ckpt.config, model->ckpt.params, model->vocab, text, model->ckpt.config.max_len);
    char* dup = dup_string(view.to_json());
    if (dup == nullptr) throw ear::internal_error("out of memory");
    *json_out = dup;
  });
}

int ear_cmd_train(const ear_train_options* options) {
  if (options == nullptr) return input_fail("ear_cmd_train: null options");
  return guarded([&] {
    ear::TrainCommand cmd;
    cmd.config_path = or_empty(options->config_path);
    cmd.train_path = or_empty(options->train_path);
    cmd.val_path = or_empty(options->val_path);
    cmd.out_dir = or_empty(options->out_dir);
    cmd.num_seeds = options->num_seeds <= 0 ? 1 : options->num_seeds;
    cmd.quiet = options->quiet != 0;
    if (options->overrides != nullptr) {
      cmd.overrides = ear::parse_config_text(options->overrides, "overrides");
    }
    ear::run_train(cmd, std::cout);
  });
}

int ear_cmd_eval(const ear_eval_options* options) {
  if (options == nullptr) return input_fail("ear_cmd_eval: null options");
  return guarded([&] {
    ear::EvalCommand cmd;
    cmd.checkpoint_path = or_empty(options->checkpoint_path);
    cmd.vocab_path = or_empty(options->vocab_path);
    cmd.data_path = or_empty(options->data_path);
    cmd.terms_path = or_empty(options->terms_path);
    cmd.out_dir = or_empty(options->out_dir);
    cmd.memberships_path = or_empty(options->memberships_path);
    cmd.baseline_scores_path = or_empty(options->baseline_scores_path);
    cmd.batch_size = options->batch_size <= 0 ? 64 : options->batch_size;
    cmd.bootstrap_samples = options->bootstrap_samples <= 0 ? 1000 : options->bootstrap_samples;
    cmd.bootstrap_fraction =
        options->bootstrap_fraction <= 0.0 ? 0.20 : options->bootstrap_fraction;
    cmd.seed = options->seed;
    cmd.quiet = options->quiet != 0;
    ear::run_eval(cmd, std::cout);
  });
}

int ear_cmd_extract_terms(const ear_extract_options* options) {
  if (options == nullptr) return input_fail("ear_cmd_extract_terms: null options");
  return guarded([&] {
    ear::ExtractCommand cmd;
    cmd.checkpoint_path = or_empty(options->checkpoint_path);
    cmd.vocab_path = or_empty(options->vocab_path);
    cmd.data_path = or_empty(options->data_path);
    cmd.out_csv_path = or_empty(options->out_csv_path);
    cmd.out_json_path = or_empty(options->out_json_path);
    cmd.min_doc_freq = options->min_doc_freq < 0.0 ? 0.01 : options->min_doc_freq;
    cmd.top_k = options->top_k <= 0 ? 50 : options->top_k;
    cmd.quiet = options->quiet != 0;
    ear::run_extract(cmd, std::cout);
  });
}

int ear_cmd_gen_synthetic(const ear_gen_synthetic_options* options) {
  if (options == nullptr) return input_fail("ear_cmd_gen_synthetic: null options");
  return guarded([&] {
    ear::GenSyntheticCommand cmd;
    cmd.templates_path = or_empty(options->templates_path);
    cmd.terms_path = or_empty(options->terms_path);
    cmd.out_data_path = or_empty(options->out_data_path);
    cmd.out_memberships_path = or_empty(options->out_memberships_path);
    cmd.allow_unbalanced = options->allow_unbalanced != 0;
    cmd.quiet = options->quiet != 0;
    ear::run_gen_synthetic(cmd, std::cout);
  });
}

int ear_cmd_gradcheck(const ear_gradcheck_options* options, double* max_rel_err_out) {
  if (options == nullptr) return input_fail("ear_cmd_gradcheck: null options");
  return guarded([&] {
    ear::GradcheckCommand cmd;
    cmd.seed = options->seed;
    cmd.step = options->step <= 0.0 ? 1e-5 : options->step;
    cmd.tolerance = options->tolerance <= 0.0 ? 1e-4 : options->tolerance;
    ear::run_gradcheck(cmd, std::cout, max_rel_err_out);
  });
}

}  // extern "C"
