#pragma once

#include <optional>
#include <string>
#include <vector>

#include "analytics.hpp"
#include "complexity.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "trainer.hpp"

namespace nsr {

struct DataBundle {
    Dataset train;
    std::optional<Dataset> val;
    std::optional<Dataset> test;
};

/// Materializes the datasets a config names (MNIST IDX pair + split, or
/// seeded synthetic blobs with matching val/test draws).
DataBundle load_data(const RunConfig& cfg);

/// Builds the initial (untrained) network for a config and input dim.
Network build_network(const RunConfig& cfg, std::size_t input_dim, int num_classes);

struct LayerResolution {
    std::vector<std::size_t> targets;  // empty = regularizer off
    std::vector<double> scores;        // warm-up variance scores (auto only)
    int auto_selected = -1;            // chosen layer (auto only)
};

/// Resolves nsr_layer = off | auto | explicit list. Auto trains a throwaway
/// vanilla copy for warmup_epochs, scores every layer by aggregated
/// intra-class response variance and picks the argmax.
LayerResolution resolve_nsr_layers(const RunConfig& cfg, const DataBundle& data);

struct RunResult {
    RunConfig config;                 // as executed (nsr_layer still symbolic)
    LayerResolution layers;
    std::vector<DynamicsRow> dynamics;
    std::vector<double> epoch_seconds;
    double final_test_error = -1.0;   // -1 when no test set
    double final_val_error = -1.0;
    double final_train_error = -1.0;
    double final_train_ce = 0.0;
    double final_mean_sigma = -1.0;   // tracked layer, training set
    int dynamics_layer = -1;
    Network net;
    std::string out_dir;              // empty when nothing was written
    std::string manifest_path, model_path, dynamics_path;
};

/// Full training run per the config; writes model.bin, dynamics.csv and
/// manifest.json into out_dir when set.
RunResult train_run(const RunConfig& cfg, const DataBundle* preloaded = nullptr);

struct SearchTrial {
    int index = 0;
    double lambda = 0.0;
    double val_error = 0.0;
    double test_error = -1.0;
};

struct SearchResult {
    std::vector<SearchTrial> trials;
    int best_index = -1;
    double best_lambda = 0.0;
    double best_val_error = 0.0;
    double best_test_error = -1.0;
    LayerResolution layers;
    std::string trials_path, manifest_path;
};

/// Random search over lambda, log-uniform on [lambda_min, lambda_max];
/// best trial = lowest validation error. The layer choice is resolved once
/// before the trials.
SearchResult search_run(const RunConfig& base, int trials, double lambda_min, double lambda_max,
                        const DataBundle* preloaded = nullptr);

struct AnalyzeOptions {
    std::string model_path;
    std::string dataset_dir;          // directory with the IDX pairs
    Split split = Split::Test;        // which pair the reports describe
    int layer = -1;                   // -1 = penultimate
    bool exclude_zero = true;
    bool with_complexity = false;
    int complexity_layer = -1;        // -1 = final layer (logits)
    double complexity_p = 2.0;
    std::string layer_scores_split = "train";
    std::string out_dir = ".";
};

struct AnalyzeResult {
    std::vector<double> layer_scores;
    CorrectnessSplit split;
    int classes_correct_lower = 0;    // #classes where correct-var < incorrect-var
    int classes_compared = 0;
    double complexity_value = -1.0;
    std::string variance_report_path, correctness_split_path, layer_scores_path, complexity_path;
};

AnalyzeResult analyze_run(const AnalyzeOptions& options);

struct BenchResult {
    std::vector<double> vanilla_epoch_seconds;
    std::vector<double> nsr_epoch_seconds;
    double vanilla_median_s = 0.0;
    double nsr_median_s = 0.0;
    double overhead_ratio = 1.0;
    std::size_t queue_bytes = 0;
    std::size_t expected_queue_bytes = 0;
    std::string manifest_path;
};

/// Interleaves vanilla and regularized epochs on the same data to control
/// clock drift; reports median per-epoch wall-clock and the overhead ratio,
/// plus the queue memory accounting.
BenchResult bench_run(const RunConfig& cfg, const DataBundle* preloaded = nullptr);

struct LemmaOutcome {
    double c_nsr = -1.0;
    double c_vanilla = -1.0;
    bool nsr_converged = false;
    bool vanilla_converged = false;
    double nsr_final_ce = 0.0;
    double vanilla_final_ce = 0.0;
};

/// Trains same-seed twins (with and without the regularizer) on a toy
/// dataset and computes the consistency-of-representations measure on the
/// chosen representation layer over the training set. A twin whose final
/// cross-entropy stays above ce_threshold is flagged non-converged.
LemmaOutcome lemma_experiment(const RunConfig& base, double ce_threshold = 0.2,
                              int representation_layer = -1, double p = 2.0,
                              const DataBundle* preloaded = nullptr);

/// Median of an unsorted sample (copies; empty input throws).
double median(std::vector<double> values);

} // namespace nsr
