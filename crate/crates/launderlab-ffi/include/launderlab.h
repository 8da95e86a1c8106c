#ifndef LAUNDERLAB_H
#define LAUNDERLAB_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  LL_OK = 0,
  /**
   * Bad configuration, bad arguments, or guard violations.
   */
  LL_VALIDATION = 1,
  /**
   * I/O or generation failure.
   */
  LL_RUNTIME = 2,
  LL_NULL_ARGUMENT = 3,
  LL_INVALID_UTF8 = 4,
} LlStatus;

/**
 * Corruption transform selector for `ll_dataset_corrupt`.
 */
typedef enum {
  LL_RANDOM_CHOICES = 0,
  LL_IDENTICAL_CHOICES = 1,
  LL_RANDOM_QUESTIONS_AND_CHOICES = 2,
  LL_IDENTICAL_QUESTIONS_AND_CHOICES = 3,
} LlCorruption;

typedef struct LlConfig LlConfig;

typedef struct LlDataset LlDataset;

typedef struct LlModel LlModel;

typedef struct LlRecords LlRecords;

/**
 * Numeric view of one experiment record.
 */
typedef struct {
  uint64_t seed;
  double alpha;
  double temperature;
  /**
   * 1 when the soft loss is KL divergence, 0 for MSE.
   */
  uint8_t soft_loss_is_kld;
  uint64_t size;
  uint32_t iteration;
  double train_acc;
  double bench_acc;
  double leakage;
} LlRecordView;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ll_version(void);

/**
 * Message for the most recent failure on this thread. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ll_last_error(void);

/**
 * Built-in default configuration.
 *
 * # Safety
 * `out` must be a valid pointer to a `LlConfig*` slot.
 */
LlStatus ll_config_default(LlConfig **out);

/**
 * Load a configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid slot.
 */
LlStatus ll_config_load(const char *path, LlConfig **out);

/**
 * # Safety
 * `cfg` must come from this library or be NULL.
 */
void ll_config_free(LlConfig *cfg);

/**
 * Generate the benchmark test set for one experiment seed.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` a valid slot.
 */
LlStatus ll_generate_benchmark(const LlConfig *cfg, uint64_t seed, LlDataset **out);

/**
 * Generate the intermediate training set for one experiment seed,
 * applying the config's corruption mode when one is set.
 *
 * # Safety
 * `cfg` and `bench` must be live handles; `out` a valid slot.
 */
LlStatus ll_generate_intermediate(const LlConfig *cfg,
                                  const LlDataset *bench,
                                  uint64_t seed,
                                  LlDataset **out);

/**
 * Read a dataset JSONL file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` a valid slot.
 */
LlStatus ll_dataset_read(const char *path, LlDataset **out);

/**
 * Write a dataset as JSONL.
 *
 * # Safety
 * `ds` must be a live handle; `path` NUL-terminated.
 */
LlStatus ll_dataset_write(const LlDataset *ds, const char *path);

/**
 * Item count; 0 for NULL.
 *
 * # Safety
 * `ds` must be a live handle or NULL.
 */
uint64_t ll_dataset_len(const LlDataset *ds);

/**
 * Apply a corruption transform, producing a new dataset.
 *
 * # Safety
 * `ds` must be a live handle; `out` a valid slot.
 */
LlStatus ll_dataset_corrupt(const LlDataset *ds, LlCorruption mode, uint64_t seed, LlDataset **out);

/**
 * # Safety
 * `ds` must come from this library or be NULL.
 */
void ll_dataset_free(LlDataset *ds);

/**
 * Count of question pairs with token-set Jaccard similarity >= tau.
 *
 * # Safety
 * `a` and `b` must be live handles; `out_count` a valid slot.
 */
LlStatus ll_vocab_overlap(const LlDataset *a, const LlDataset *b, double tau, uint64_t *out_count);

/**
 * Placement: train a teacher on benchmark test data. `vocab_extra`
 * may be NULL; pass the intermediate set there so teacher and student
 * share one vocabulary.
 *
 * # Safety
 * Handles must be live (or NULL where documented); out pointers valid.
 */
LlStatus ll_placement(const LlConfig *cfg,
                      const LlDataset *bench,
                      const LlDataset *vocab_extra,
                      uint64_t seed,
                      LlModel **out_model,
                      double *out_accuracy);

/**
 * Layering: distill a student from a teacher on an intermediate set.
 *
 * # Safety
 * Handles must be live; out pointers valid.
 */
LlStatus ll_layering(const LlConfig *cfg,
                     const LlModel *teacher,
                     const LlDataset *intermediate,
                     uint64_t seed,
                     LlModel **out_model,
                     double *out_train_acc);

/**
 * Integration: benchmark accuracy and leakage of a model.
 *
 * # Safety
 * Handles must be live; out pointers valid.
 */
LlStatus ll_integration(const LlModel *model,
                        const LlDataset *bench,
                        double *out_accuracy,
                        double *out_leakage);

/**
 * Save a model checkpoint.
 *
 * # Safety
 * `model` must be live; `path` NUL-terminated.
 */
LlStatus ll_model_save(const LlModel *model, const char *path);

/**
 * Load a model checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` a valid slot.
 */
LlStatus ll_model_load(const char *path, LlModel **out);

/**
 * # Safety
 * `model` must come from this library or be NULL.
 */
void ll_model_free(LlModel *model);

/**
 * Full three-phase pipeline over the config's seed list.
 *
 * # Safety
 * `cfg` must be live; `out` a valid slot.
 */
LlStatus ll_run_laundering(const LlConfig *cfg, LlRecords **out);

/**
 * Iterated distillation chains (`n_iter` steps per seed).
 *
 * # Safety
 * `cfg` must be live; `out` a valid slot.
 */
LlStatus ll_iterative(const LlConfig *cfg, uint64_t n_iter, LlRecords **out);

/**
 * # Safety
 * `records` must be a live handle or NULL.
 */
uint64_t ll_records_len(const LlRecords *records);

/**
 * Numeric view of record `index`.
 *
 * # Safety
 * `records` must be live; `out` a valid pointer.
 */
LlStatus ll_records_get(const LlRecords *records, uint64_t index, LlRecordView *out);

/**
 * Write records as CSV (fixed column schema); `append` validates the
 * existing header first.
 *
 * # Safety
 * `records` must be live; `path` NUL-terminated.
 */
LlStatus ll_records_write_csv(const LlRecords *records, const char *path, bool append);

/**
 * # Safety
 * `records` must come from this library or be NULL.
 */
void ll_records_free(LlRecords *records);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAUNDERLAB_H */
