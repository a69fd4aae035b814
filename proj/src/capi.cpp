#include "nsr/nsr.h"

#include <cstring>
#include <new>
#include <string>

#include "config.hpp"
#include "dataset.hpp"
#include "experiments.hpp"
#include "network.hpp"
#include "trainer.hpp"

struct nsr_config {
    nsr::RunConfig cfg;
};

struct nsr_dataset {
    nsr::Dataset ds;
};

struct nsr_model {
    nsr::Network net;
};

namespace {

thread_local std::string g_last_error;

nsr_status fail(nsr_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

// Runs a callable, translating the library's exception taxonomy into
// status codes.
template <typename Fn>
nsr_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return NSR_OK;
    } catch (const nsr::ShapeError& e) {
        return fail(NSR_ERR_SHAPE, e.what());
    } catch (const nsr::FormatError& e) {
        return fail(NSR_ERR_FORMAT, e.what());
    } catch (const nsr::IoError& e) {
        return fail(NSR_ERR_IO, e.what());
    } catch (const nsr::NumericError& e) {
        return fail(NSR_ERR_NUMERIC, e.what());
    } catch (const nsr::ConfigError& e) {
        return fail(NSR_ERR_CONFIG, e.what());
    } catch (const nsr::InvalidArgument& e) {
        return fail(NSR_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(NSR_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(NSR_ERR_INTERNAL, e.what());
    }
}

nsr_status require(bool ok, const char* what) {
    if (ok) return NSR_OK;
    return fail(NSR_ERR_INVALID_ARGUMENT, std::string("null argument: ") + what);
}

} // namespace

extern "C" {

const char* nsr_status_name(nsr_status status) {
    switch (status) {
        case NSR_OK: return "ok";
        case NSR_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case NSR_ERR_SHAPE: return "shape_error";
        case NSR_ERR_FORMAT: return "format_error";
        case NSR_ERR_IO: return "io_error";
        case NSR_ERR_NUMERIC: return "numeric_error";
        case NSR_ERR_CONFIG: return "config_error";
        case NSR_ERR_INTERNAL: return "internal_error";
    }
    return "unknown";
}

const char* nsr_last_error(void) { return g_last_error.c_str(); }

nsr_status nsr_config_create(nsr_config** out) {
    if (auto s = require(out != nullptr, "out"); s != NSR_OK) return s;
    return guarded([&] { *out = new nsr_config{}; });
}

nsr_status nsr_config_load(const char* path, nsr_config** out) {
    if (auto s = require(path && out, "path/out"); s != NSR_OK) return s;
    return guarded([&] { *out = new nsr_config{nsr::load_config_file(path)}; });
}

nsr_status nsr_config_set(nsr_config* cfg, const char* key, const char* value) {
    if (auto s = require(cfg && key && value, "cfg/key/value"); s != NSR_OK) return s;
    return guarded([&] { nsr::config_set(cfg->cfg, key, value); });
}

nsr_status nsr_config_get(const nsr_config* cfg, const char* key, char* buffer,
                          size_t buffer_len) {
    if (auto s = require(cfg && key && buffer, "cfg/key/buffer"); s != NSR_OK) return s;
    return guarded([&] {
        const std::string value = nsr::config_get(cfg->cfg, key);
        if (value.size() + 1 > buffer_len) {
            throw nsr::InvalidArgument("buffer too small for value of '" + std::string(key) +
                                       "' (" + std::to_string(value.size() + 1) + " bytes needed)");
        }
        std::memcpy(buffer, value.c_str(), value.size() + 1);
    });
}

void nsr_config_free(nsr_config* cfg) { delete cfg; }

nsr_status nsr_dataset_load_idx(const char* images_path, const char* labels_path,
                                nsr_dataset** out) {
    if (auto s = require(images_path && labels_path && out, "paths/out"); s != NSR_OK) return s;
    return guarded([&] { *out = new nsr_dataset{nsr::load_idx(images_path, labels_path)}; });
}

nsr_status nsr_dataset_blobs(int num_classes, int per_class, int dim, double spread,
                             double stddev, unsigned long long seed, nsr_dataset** out) {
    if (auto s = require(out != nullptr, "out"); s != NSR_OK) return s;
    return guarded([&] {
        const nsr::Matrix2D centers = nsr::blob_grid_centers(num_classes, dim, spread);
        *out = new nsr_dataset{nsr::gaussian_blobs(centers, per_class, stddev, seed)};
    });
}

size_t nsr_dataset_size(const nsr_dataset* ds) { return ds ? ds->ds.size() : 0; }
size_t nsr_dataset_dim(const nsr_dataset* ds) { return ds ? ds->ds.dim() : 0; }
int nsr_dataset_num_classes(const nsr_dataset* ds) { return ds ? ds->ds.num_classes : 0; }
void nsr_dataset_free(nsr_dataset* ds) { delete ds; }

nsr_status nsr_model_load(const char* path, nsr_model** out) {
    if (auto s = require(path && out, "path/out"); s != NSR_OK) return s;
    return guarded([&] { *out = new nsr_model{nsr::Network::load(path)}; });
}

nsr_status nsr_model_save(const nsr_model* model, const char* path) {
    if (auto s = require(model && path, "model/path"); s != NSR_OK) return s;
    return guarded([&] { model->net.save(path); });
}

size_t nsr_model_num_layers(const nsr_model* model) {
    return model ? model->net.num_layers() : 0;
}

nsr_status nsr_model_eval_error(const nsr_model* model, const nsr_dataset* ds,
                                double* error_out) {
    if (auto s = require(model && ds && error_out, "model/ds/error_out"); s != NSR_OK) return s;
    return guarded([&] { *error_out = nsr::evaluate_error(model->net, ds->ds); });
}

void nsr_model_free(nsr_model* model) { delete model; }

nsr_status nsr_run_train(const nsr_config* cfg, nsr_train_summary* summary_out,
                         nsr_model** model_out) {
    if (auto s = require(cfg != nullptr, "cfg"); s != NSR_OK) return s;
    return guarded([&] {
        nsr::RunResult result = nsr::train_run(cfg->cfg);
        if (summary_out) {
            summary_out->test_error = result.final_test_error;
            summary_out->val_error = result.final_val_error;
            summary_out->train_error = result.final_train_error;
            summary_out->train_ce = result.final_train_ce;
            summary_out->mean_sigma = result.final_mean_sigma;
            summary_out->auto_selected_layer = result.layers.auto_selected;
            summary_out->dynamics_layer = result.dynamics_layer;
        }
        if (model_out) *model_out = new nsr_model{std::move(result.net)};
    });
}

nsr_status nsr_run_search(const nsr_config* cfg, int trials, double lambda_min,
                          double lambda_max, nsr_search_summary* summary_out) {
    if (auto s = require(cfg != nullptr, "cfg"); s != NSR_OK) return s;
    return guarded([&] {
        nsr::SearchResult result =
            nsr::search_run(cfg->cfg, trials, lambda_min, lambda_max);
        if (summary_out) {
            summary_out->best_lambda = result.best_lambda;
            summary_out->best_val_error = result.best_val_error;
            summary_out->best_test_error = result.best_test_error;
            summary_out->best_trial = result.best_index;
            summary_out->trials = static_cast<int>(result.trials.size());
        }
    });
}

nsr_status nsr_run_analyze(const char* model_path, const char* dataset_dir, const char* split,
                           const char* out_dir, int layer, int exclude_zero,
                           int with_complexity, int complexity_layer,
                           nsr_analyze_summary* summary_out) {
    if (auto s = require(model_path && dataset_dir, "model_path/dataset_dir"); s != NSR_OK) {
        return s;
    }
    return guarded([&] {
        nsr::AnalyzeOptions options;
        options.model_path = model_path;
        options.dataset_dir = dataset_dir;
        if (split && std::string(split) == "train") {
            options.split = nsr::Split::Train;
        } else if (!split || std::string(split) == "test") {
            options.split = nsr::Split::Test;
        } else {
            throw nsr::InvalidArgument("split must be train or test");
        }
        if (out_dir) options.out_dir = out_dir;
        options.layer = layer;
        options.exclude_zero = exclude_zero != 0;
        options.with_complexity = with_complexity != 0;
        options.complexity_layer = complexity_layer;
        nsr::AnalyzeResult result = nsr::analyze_run(options);
        if (summary_out) {
            summary_out->classes_compared = result.classes_compared;
            summary_out->classes_correct_lower = result.classes_correct_lower;
            summary_out->complexity = result.complexity_value;
        }
    });
}

nsr_status nsr_run_bench(const nsr_config* cfg, nsr_bench_summary* summary_out) {
    if (auto s = require(cfg != nullptr, "cfg"); s != NSR_OK) return s;
    return guarded([&] {
        nsr::BenchResult result = nsr::bench_run(cfg->cfg);
        if (summary_out) {
            summary_out->vanilla_median_s = result.vanilla_median_s;
            summary_out->nsr_median_s = result.nsr_median_s;
            summary_out->overhead_ratio = result.overhead_ratio;
            summary_out->queue_bytes = result.queue_bytes;
            summary_out->expected_queue_bytes = result.expected_queue_bytes;
        }
    });
}

} // extern "C"
