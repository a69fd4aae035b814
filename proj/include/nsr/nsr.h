/*
 * Public C interface to the neuron-steadiness training engine.
 *
 * The library is a C++ core exposed through opaque handles and status
 * codes; every function that can fail returns an nsr_status and leaves a
 * human-readable message in nsr_last_error() (thread-local). Handles are
 * created by nsr_*_create/load functions and released with the matching
 * nsr_*_free; freeing NULL is a no-op.
 */
#ifndef NSR_H
#define NSR_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nsr_status {
    NSR_OK = 0,
    NSR_ERR_INVALID_ARGUMENT = 1,
    NSR_ERR_SHAPE = 2,
    NSR_ERR_FORMAT = 3,
    NSR_ERR_IO = 4,
    NSR_ERR_NUMERIC = 5,
    NSR_ERR_CONFIG = 6,
    NSR_ERR_INTERNAL = 7
} nsr_status;

const char* nsr_status_name(nsr_status status);

/* Message describing the most recent failure on this thread ("" if none). */
const char* nsr_last_error(void);

typedef struct nsr_config nsr_config;
typedef struct nsr_dataset nsr_dataset;
typedef struct nsr_model nsr_model;

/* ---- run configuration (flat key = value space) ---- */

nsr_status nsr_config_create(nsr_config** out);
nsr_status nsr_config_load(const char* path, nsr_config** out);
nsr_status nsr_config_set(nsr_config* cfg, const char* key, const char* value);
/* Copies the value into buffer (NUL-terminated); fails with
 * NSR_ERR_INVALID_ARGUMENT when the buffer is too small. */
nsr_status nsr_config_get(const nsr_config* cfg, const char* key, char* buffer,
                          size_t buffer_len);
void nsr_config_free(nsr_config* cfg);

/* ---- datasets ---- */

nsr_status nsr_dataset_load_idx(const char* images_path, const char* labels_path,
                                nsr_dataset** out);
nsr_status nsr_dataset_blobs(int num_classes, int per_class, int dim, double spread,
                             double stddev, unsigned long long seed, nsr_dataset** out);
size_t nsr_dataset_size(const nsr_dataset* ds);
size_t nsr_dataset_dim(const nsr_dataset* ds);
int nsr_dataset_num_classes(const nsr_dataset* ds);
void nsr_dataset_free(nsr_dataset* ds);

/* ---- trained models ---- */

nsr_status nsr_model_load(const char* path, nsr_model** out);
nsr_status nsr_model_save(const nsr_model* model, const char* path);
size_t nsr_model_num_layers(const nsr_model* model);
nsr_status nsr_model_eval_error(const nsr_model* model, const nsr_dataset* ds,
                                double* error_out);
void nsr_model_free(nsr_model* model);

/* ---- experiment runs ----
 *
 * out_dir in the config controls artifact emission (model.bin,
 * dynamics.csv, trials.csv, manifest.json); empty out_dir keeps the run
 * in memory. */

typedef struct nsr_train_summary {
    double test_error;  /* -1 when the config has no test set */
    double val_error;   /* -1 when the config has no validation set */
    double train_error;
    double train_ce;
    double mean_sigma;        /* tracked layer, training set */
    int auto_selected_layer;  /* -1 unless nsr_layer = auto */
    int dynamics_layer;
} nsr_train_summary;

nsr_status nsr_run_train(const nsr_config* cfg, nsr_train_summary* summary_out,
                         nsr_model** model_out);

typedef struct nsr_search_summary {
    double best_lambda;
    double best_val_error;
    double best_test_error;
    int best_trial;
    int trials;
} nsr_search_summary;

nsr_status nsr_run_search(const nsr_config* cfg, int trials, double lambda_min,
                          double lambda_max, nsr_search_summary* summary_out);

typedef struct nsr_analyze_summary {
    int classes_compared;
    int classes_correct_lower; /* correct-split variance below incorrect-split */
    double complexity;         /* -1 unless with_complexity */
} nsr_analyze_summary;

nsr_status nsr_run_analyze(const char* model_path, const char* dataset_dir,
                           const char* split /* "train" | "test" */,
                           const char* out_dir, int layer /* -1 = penultimate */,
                           int exclude_zero, int with_complexity,
                           int complexity_layer /* -1 = final */,
                           nsr_analyze_summary* summary_out);

typedef struct nsr_bench_summary {
    double vanilla_median_s;
    double nsr_median_s;
    double overhead_ratio;
    size_t queue_bytes;
    size_t expected_queue_bytes;
} nsr_bench_summary;

nsr_status nsr_run_bench(const nsr_config* cfg, nsr_bench_summary* summary_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* NSR_H */
