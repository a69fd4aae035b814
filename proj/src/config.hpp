#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace nsr {

/// One experiment run, fully described. Parsed from a flat key = value
/// config file; CLI flags override individual keys.
struct RunConfig {
    // model: mlp-3|mlp-4|mlp-6|mlp-8|mlp-10 presets, or "custom" with
    // explicit hidden dims.
    std::string model = "mlp-4";
    std::vector<std::size_t> hidden_dims;
    double dropout = 0.0;

    // dataset
    std::string dataset = "mnist"; // mnist | blobs
    std::string mnist_dir;
    bool use_val_split = true; // 60000 -> 50000 train + 10000 val
    int blobs_classes = 3;
    int blobs_per_class = 200;
    int blobs_dim = 10;
    double blobs_spread = 6.0;
    double blobs_std = 1.0;
    int blobs_test_per_class = 200;

    // optimization
    std::string optimizer = "sgd"; // sgd | momentum
    double learning_rate = 0.1;
    double momentum = 0.9;
    int epochs = 30;
    std::size_t batch_size = 100;
    std::uint64_t seed = 1;

    // steadiness regularization
    double nsr_lambda = 0.0;
    int nsr_queue_len = 5;
    std::string nsr_layer = "off"; // off | auto | index list ("2" or "1,2")
    bool nsr_exclude_zero = true;
    std::string nsr_gradient_mode = "detached_mean"; // | batch_variance
    int warmup_epochs = 1;                           // vanilla warm-up before auto selection

    // baseline regularizers
    std::string reg = "none"; // none | l1 | l2
    double reg_coef = 0.0;
    bool combine = false; // allow stacking nsr with l1/l2/dropout

    // outputs
    std::string out_dir;
    bool dynamics = true;
    int dynamics_layer = -1; // -1: first nsr target, else penultimate
    std::string layer_scores_split = "train";
    bool verbose = false;

    void validate() const;
};

/// Applies one key = value pair; throws ConfigError on unknown keys or
/// unparsable values.
void config_set(RunConfig& cfg, const std::string& key, const std::string& value);

std::string config_get(const RunConfig& cfg, const std::string& key);

/// Flat text format: one `key = value` per line, '#' comments, blank lines
/// ignored.
RunConfig load_config_file(const std::string& path);

/// All keys in a stable order, for manifests and round-trips.
std::map<std::string, std::string> config_to_map(const RunConfig& cfg);

/// Hidden-layer widths of the named MLP preset (layer count includes the
/// input layer, so mlp-4 has two hidden layers).
std::vector<std::size_t> mlp_preset_hidden_dims(const std::string& model);

} // namespace nsr
