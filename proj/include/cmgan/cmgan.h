/* Copyright 2026 The cmgan Authors
 * SPDX-License-Identifier: Apache-2.0 */

/* C interface of the cmgan library. Objects are opaque handles; every call
 * returns a cmgan_status and leaves a message for cmgan_last_error() on
 * failure. Messages are per thread and stay valid until the next failing
 * call on that thread. */

#ifndef CMGAN_CMGAN_H_
#define CMGAN_CMGAN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CMGAN_API __declspec(dllexport)
#else
#define CMGAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as the command-line exit codes. */
typedef enum cmgan_status {
  CMGAN_OK = 0,
  CMGAN_ERR_INTERNAL = 1,
  CMGAN_ERR_CONFIG = 2,
  CMGAN_ERR_IO = 3,
  CMGAN_ERR_NUMERICAL = 4,
  /* A verification suite ran and reported failures. */
  CMGAN_ERR_VERIFY = 5,
  /* Null handle or output pointer. */
  CMGAN_ERR_ARGUMENT = 6
} cmgan_status;

typedef struct cmgan_config cmgan_config;
typedef struct cmgan_trainer cmgan_trainer;

typedef struct cmgan_step_report {
  int64_t step;
  double loss_d1;
  double loss_d2;
  double loss_g_adv;
  double l_cyc;
  double l_msssim;
  double l_cpercep;
  double l_cstyle;
  /* Weighted cycle objective. */
  double total;
} cmgan_step_report;

typedef struct cmgan_metrics {
  double ssim;
  double psnr_db;
  double mse;
  double uqi;
} cmgan_metrics;

typedef struct cmgan_dataset_counts {
  int64_t clean_train;
  int64_t corrupted_train;
  int64_t val_pairs;
} cmgan_dataset_counts;

/* Receives one line of text (no trailing newline). */
typedef void (*cmgan_line_fn)(const char* line, void* user);
typedef void (*cmgan_step_fn)(const cmgan_step_report* report, void* user);

CMGAN_API const char* cmgan_version(void);
CMGAN_API const char* cmgan_last_error(void);
/* Routes library warnings; a null callback restores standard error. */
CMGAN_API void cmgan_set_warning_callback(cmgan_line_fn fn, void* user);

/* Configuration: every knob of a run as flat key = value pairs. */
CMGAN_API cmgan_status cmgan_config_create(cmgan_config** out);
CMGAN_API void cmgan_config_destroy(cmgan_config* cfg);
CMGAN_API cmgan_status cmgan_config_load(cmgan_config* cfg, const char* path);
CMGAN_API cmgan_status cmgan_config_set(cmgan_config* cfg, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated, truncated to cap); *needed,
 * when non-null, receives the full length including the NUL. */
CMGAN_API cmgan_status cmgan_config_get(const cmgan_config* cfg, const char* key, char* buf, size_t cap,
                                        size_t* needed);
/* "cyclegan" or "cyclemedgan". */
CMGAN_API cmgan_status cmgan_config_apply_ablation(cmgan_config* cfg, const char* preset);
CMGAN_API cmgan_status cmgan_config_validate(const cmgan_config* cfg);
/* Writes the effective configuration, one key per line. */
CMGAN_API cmgan_status cmgan_config_write(const cmgan_config* cfg, const char* path);

/* Dataset synthesis into out_dir, plus config.txt. Sources are the PNGs of
 * clean_dir, or, when clean_dir is null, `phantoms` generated phantoms of
 * image_size pixels seeded by motion_seed. */
CMGAN_API cmgan_status cmgan_simulate(const cmgan_config* cfg, const char* clean_dir, int phantoms,
                                      const char* out_dir, cmgan_dataset_counts* counts);

/* Training on data_dir/train/{corrupted,clean}. */
CMGAN_API cmgan_status cmgan_trainer_create(const cmgan_config* cfg, const char* data_dir, cmgan_trainer** out);
CMGAN_API void cmgan_trainer_destroy(cmgan_trainer* tr);
CMGAN_API cmgan_status cmgan_trainer_restore(cmgan_trainer* tr, const char* checkpoint_path);
CMGAN_API cmgan_status cmgan_trainer_save(const cmgan_trainer* tr, const char* checkpoint_path);
/* One update on the batch the schedule assigns to the current step. */
CMGAN_API cmgan_status cmgan_trainer_step(cmgan_trainer* tr, cmgan_step_report* report);
/* Runs to the configured end, writing train_log.csv, checkpoints and
 * config.txt under out_dir. */
CMGAN_API cmgan_status cmgan_trainer_fit(cmgan_trainer* tr, const char* out_dir, cmgan_step_fn on_step, void* user);
CMGAN_API int64_t cmgan_trainer_current_step(const cmgan_trainer* tr);
CMGAN_API int64_t cmgan_trainer_total_steps(const cmgan_trainer* tr);

/* Applies G1 of a training checkpoint to every PNG in in_dir. Skipped files
 * are reported as warnings. */
CMGAN_API cmgan_status cmgan_correct(const char* checkpoint_path, const char* in_dir, const char* out_dir,
                                     size_t* written, size_t* skipped);

/* Pairs equally named PNGs; writes the per-image CSV when csv_path is
 * non-null and returns the aggregate. Unmatched files are warnings. */
CMGAN_API cmgan_status cmgan_evaluate(const char* corrected_dir, const char* reference_dir, const char* csv_path,
                                      unsigned threads, cmgan_metrics* aggregate, size_t* rows);
/* The aggregate row formatted as in the CSV. */
CMGAN_API cmgan_status cmgan_format_metrics(const cmgan_metrics* m, char* buf, size_t cap, size_t* needed);

/* Runs "gradcheck", "metrics", "spectral" or "attention", emitting one line
 * per check. Returns CMGAN_ERR_VERIFY when any check fails. */
CMGAN_API cmgan_status cmgan_verify(const char* suite, cmgan_line_fn on_line, void* user);

#ifdef __cplusplus
}
#endif

#endif /* CMGAN_CMGAN_H_ */
