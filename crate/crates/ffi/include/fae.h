/* C ABI for the fae feature-selection library. */

#ifndef FAE_H
#define FAE_H

/* Generated by cbindgen from the fae-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Model family selector for [`fae_train`].
typedef enum FaeMethod {
  FAE_METHOD_AE = 0,
  FAE_METHOD_IAE = 1,
  FAE_METHOD_FAE = 2,
} FaeMethod;

// L1 normalization on the scoring weights.
typedef enum FaeL1Mode {
  FAE_L1_MODE_MEAN = 0,
  FAE_L1_MODE_SUM = 1,
} FaeL1Mode;

// Status codes returned by every fallible function.
typedef enum FaeStatus {
  FAE_STATUS_OK = 0,
  FAE_STATUS_NULL_POINTER = 1,
  FAE_STATUS_INVALID_ARGUMENT = 2,
  FAE_STATUS_DIMENSION_MISMATCH = 3,
  FAE_STATUS_NUMERICAL_ERROR = 4,
  FAE_STATUS_IO_ERROR = 5,
  FAE_STATUS_PARSE_ERROR = 6,
  FAE_STATUS_DIVERGED = 7,
  FAE_STATUS_UTF8_ERROR = 8,
  FAE_STATUS_INTERNAL_ERROR = 9,
} FaeStatus;

// Opaque dataset handle.
typedef struct FaeDataset FaeDataset;

// Opaque trained-model handle.
typedef struct FaeModel FaeModel;

// Training configuration; obtain defaults from
// [`fae_train_config_default`] and override fields as needed.
typedef struct FaeTrainConfig {
  enum FaeMethod method;
  // Number of selected features.
  size_t k;
  // Latent dimension; 0 means "use k".
  size_t d;
  double lambda1;
  double lambda2;
  double lr;
  size_t epochs;
  // Mini-batch size; 0 means full-batch.
  size_t batch;
  uint64_t seed;
  enum FaeL1Mode l1_mode;
  // Nonzero: return final-epoch parameters instead of the best
  // validation checkpoint.
  int32_t use_final_epoch;
} FaeTrainConfig;

// Library version as a static NUL-terminated string.
const char *fae_version(void);

// Message of the last error on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *fae_last_error_message(void);

// Default configuration for `k` selected features: `d = k`, `lambda1 = 2`,
// `lambda2 = 0.1`, `lr = 0.001`, 1000 full-batch epochs, mean L1, best
// validation checkpoint.
struct FaeTrainConfig fae_train_config_default(size_t k);

// Builds a dataset from a dense row-major `rows x cols` array. `labels`
// may be NULL; when given it must hold `rows` entries. The data is copied.
//
// # Safety
// `values` must point to `rows * cols` readable doubles and `labels`, if
// non-NULL, to `rows` readable uint32 values; `out` must be writable.
enum FaeStatus fae_dataset_from_dense(size_t rows,
                                      size_t cols,
                                      const double *values,
                                      const uint32_t *labels,
                                      struct FaeDataset **out);

// Loads a delimited numeric file. `label_column` is a 0-based column
// index, or -1 for no labels.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` writable.
enum FaeStatus fae_dataset_load_csv(const char *path,
                                    int32_t has_header,
                                    int64_t label_column,
                                    struct FaeDataset **out);

// Loads IDX images (and labels when `labels_path` is non-NULL); `.gz`
// files are detected by magic bytes.
//
// # Safety
// `images_path` must be a valid NUL-terminated string; `labels_path` may
// be NULL; `out` must be writable.
enum FaeStatus fae_dataset_load_idx(const char *images_path,
                                    const char *labels_path,
                                    struct FaeDataset **out);

// # Safety
// `ds` must be NULL or a live dataset handle.
size_t fae_dataset_rows(const struct FaeDataset *ds);

// # Safety
// `ds` must be NULL or a live dataset handle.
size_t fae_dataset_cols(const struct FaeDataset *ds);

// 1 when the dataset carries labels.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
int32_t fae_dataset_has_labels(const struct FaeDataset *ds);

// # Safety
// `ds` must be a pointer from a `fae_dataset_*` constructor, not yet
// freed; NULL is allowed.
void fae_dataset_free(struct FaeDataset *ds);

// Trains AE, IAE, or FAE on `train`, checkpointing against `val` (`val`
// may be NULL to validate on the training data).
//
// # Safety
// `train` must be a live dataset handle, `val` a live handle or NULL,
// `cfg` readable, and `out` writable.
enum FaeStatus fae_train(const struct FaeDataset *train,
                         const struct FaeDataset *val,
                         const struct FaeTrainConfig *cfg,
                         struct FaeModel **out);

// Trains an h-group hierarchical FAE. `lambdas` holds `h + 1` values:
// the L1 coefficient first, then one reconstruction coefficient per
// group. `cfg.method`, `cfg.lambda1`, and `cfg.lambda2` are ignored.
//
// # Safety
// As [`fae_train`]; additionally `lambdas` must point to `h + 1` readable
// doubles.
enum FaeStatus fae_train_hfae(const struct FaeDataset *train,
                              const struct FaeDataset *val,
                              const struct FaeTrainConfig *cfg,
                              size_t h,
                              const double *lambdas,
                              struct FaeModel **out);

// # Safety
// `model` must be NULL or a live model handle.
size_t fae_model_num_features(const struct FaeModel *model);

// # Safety
// `model` must be NULL or a live model handle.
size_t fae_model_k(const struct FaeModel *model);

// Number of hierarchy groups (1 for non-hierarchical models).
//
// # Safety
// `model` must be NULL or a live model handle.
size_t fae_model_num_groups(const struct FaeModel *model);

// Length of the full selection (`k`, or `h*k` for hierarchies).
//
// # Safety
// `model` must be NULL or a live model handle.
size_t fae_model_selection_len(const struct FaeModel *model);

// Writes the selected feature indices (descending importance; for
// hierarchies the groups concatenate in order) into `out`, which must
// hold `fae_model_selection_len` entries.
//
// # Safety
// `model` must be a live model handle and `out` writable for `len`
// entries.
enum FaeStatus fae_model_selected_indices(const struct FaeModel *model, size_t *out, size_t len);

// Writes group `group` (0-based) of a hierarchical model into `out`
// (`k` entries).
//
// # Safety
// As [`fae_model_selected_indices`].
enum FaeStatus fae_model_group_indices(const struct FaeModel *model,
                                       size_t group,
                                       size_t *out,
                                       size_t len);

// Copies the per-feature importance scores into `out` (`m` entries).
//
// # Safety
// `model` must be a live model handle and `out` writable for `len`
// entries.
enum FaeStatus fae_model_feature_weights(const struct FaeModel *model, double *out, size_t len);

// Saves the model as a versioned JSON checkpoint.
//
// # Safety
// `model` must be a live model handle and `path` a valid NUL-terminated
// string.
enum FaeStatus fae_model_save(const struct FaeModel *model, const char *path);

// Loads a checkpoint written by [`fae_model_save`] (or the CLI).
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` writable.
enum FaeStatus fae_model_load(const char *path, struct FaeModel **out);

// # Safety
// `model` must be a pointer from a training or load call, not yet freed;
// NULL is allowed.
void fae_model_free(struct FaeModel *model);

// Linear-reconstruction MSE of the model's selection: a least-squares
// decoder is fitted on `train` and evaluated on `test`.
//
// # Safety
// `model`, `train`, and `test` must be live handles; `out` writable.
enum FaeStatus fae_eval_reconstruction(const struct FaeModel *model,
                                       const struct FaeDataset *train,
                                       const struct FaeDataset *test,
                                       double *out);

// Extra-trees classification accuracy on the model's selected features;
// both datasets must carry labels.
//
// # Safety
// As [`fae_eval_reconstruction`].
enum FaeStatus fae_eval_accuracy(const struct FaeModel *model,
                                 const struct FaeDataset *train,
                                 const struct FaeDataset *test,
                                 size_t n_trees,
                                 uint64_t tree_seed,
                                 double *out);

#endif  /* FAE_H */
