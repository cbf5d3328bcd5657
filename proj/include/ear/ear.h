#ifndef EAR_EAR_H
#define EAR_EAR_H

/* C interface to the entropy-regularized text classifier. All functions
 * return EAR_OK on success; on failure they return the error class and
 * leave a message readable through ear_last_error() on the calling thread.
 *
 * Strings returned through char** outputs are owned by the caller and must
 * be released with ear_string_free(). Paths and other const char* inputs
 * are UTF-8; optional ones accept NULL. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define EAR_OK 0
#define EAR_ERR_INTERNAL 1
#define EAR_ERR_INPUT 2

const char* ear_version(void);

/* Message from the last failing call on this thread; empty string if none. */
const char* ear_last_error(void);

void ear_string_free(char* s);

/* ---- model handle: a loaded checkpoint plus its vocabulary ---- */

typedef struct ear_model ear_model;

int ear_model_open(const char* checkpoint_path, const char* vocab_path, ear_model** out);
void ear_model_close(ear_model* model);

/* Probability of the hateful class for one text. */
int ear_model_score(ear_model* model, const char* text, double* hate_probability);

/* Per-token attention-entropy profile as JSON (layers x positions plus
 * aligned token strings). */
int ear_model_profile_json(ear_model* model, const char* text, char** json_out);

/* ---- command entry points (the CLI is a thin shell over these) ---- */

typedef struct ear_train_options {
  const char* config_path;  /* key=value file; NULL for defaults */
  const char* overrides;    /* newline-separated key=value pairs; NULL ok */
  const char* train_path;   /* required */
  const char* val_path;     /* NULL: seeded stratified split */
  const char* out_dir;      /* required */
  int num_seeds;            /* <= 0 means 1 */
  int quiet;                /* nonzero suppresses progress lines */
} ear_train_options;

int ear_cmd_train(const ear_train_options* options);

typedef struct ear_eval_options {
  const char* checkpoint_path;
  const char* vocab_path;
  const char* data_path;
  const char* terms_path;
  const char* out_dir;
  const char* memberships_path;      /* NULL: detect terms from text */
  const char* baseline_scores_path;  /* NULL: no significance block */
  int batch_size;                    /* <= 0 means 64 */
  int bootstrap_samples;             /* <= 0 means 1000 */
  double bootstrap_fraction;         /* <= 0 means 0.20 */
  unsigned long long seed;
  int quiet;
} ear_eval_options;

int ear_cmd_eval(const ear_eval_options* options);

typedef struct ear_extract_options {
  const char* checkpoint_path;
  const char* vocab_path;
  const char* data_path;
  const char* out_csv_path;
  const char* out_json_path;  /* NULL: CSV only */
  double min_doc_freq;        /* < 0 means 0.01 */
  int top_k;                  /* <= 0 means 50 */
  int quiet;
} ear_extract_options;

int ear_cmd_extract_terms(const ear_extract_options* options);

typedef struct ear_gen_synthetic_options {
  const char* templates_path;
  const char* terms_path;
  const char* out_data_path;
  const char* out_memberships_path;
  int allow_unbalanced;
  int quiet;
} ear_gen_synthetic_options;

int ear_cmd_gen_synthetic(const ear_gen_synthetic_options* options);

typedef struct ear_gradcheck_options {
  unsigned long long seed;
  double step;       /* <= 0 means 1e-5 */
  double tolerance;  /* <= 0 means 1e-4 */
} ear_gradcheck_options;

/* max_rel_err_out may be NULL. */
int ear_cmd_gradcheck(const ear_gradcheck_options* options, double* max_rel_err_out);

#ifdef __cplusplus
}
#endif

#endif /* EAR_EAR_H */
