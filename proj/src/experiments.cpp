#include "experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"

namespace nsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double elapsed_seconds(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json_atomic(const std::string& path, const json& j) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out << j.dump(2) << "\n";
        if (!out) throw IoError("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

std::string path_join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

Trainer::Options trainer_options(const RunConfig& cfg, const std::vector<std::size_t>& targets) {
    Trainer::Options opts;
    opts.optimizer = cfg.optimizer == "momentum"
                         ? OptimizerState::momentum(cfg.learning_rate, cfg.momentum)
                         : OptimizerState::sgd(cfg.learning_rate);
    opts.nsr.lambda = cfg.nsr_lambda;
    opts.nsr.queue_len = cfg.nsr_queue_len;
    opts.nsr.target_layers = targets;
    opts.nsr.exclude_zero_relu = cfg.nsr_exclude_zero;
    opts.nsr.gradient_mode = cfg.nsr_gradient_mode == "batch_variance"
                                 ? GradientMode::BatchVariance
                                 : GradientMode::DetachedMean;
    if (targets.empty()) opts.nsr.lambda = 0.0;
    if (cfg.reg == "l1" && cfg.reg_coef > 0.0) {
        opts.penalty = PenaltyKind::L1;
        opts.penalty_coef = cfg.reg_coef;
    } else if (cfg.reg == "l2" && cfg.reg_coef > 0.0) {
        opts.penalty = PenaltyKind::L2;
        opts.penalty_coef = cfg.reg_coef;
    }
    opts.batch_size = cfg.batch_size;
    opts.seed = cfg.seed;
    return opts;
}

const Dataset& scores_dataset(const RunConfig& cfg, const DataBundle& data) {
    if (cfg.layer_scores_split == "test" && data.test) return *data.test;
    return data.train;
}

std::vector<std::size_t> parse_layer_list(const std::string& value, std::size_t num_layers) {
    std::vector<std::size_t> layers;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t pos = 0;
        long long idx = -1;
        try {
            idx = std::stoll(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != tok.size() || idx < 0) {
            throw ConfigError("nsr_layer must be off, auto or a layer index list, got '" + value +
                              "'");
        }
        if (static_cast<std::size_t>(idx) >= num_layers) {
            throw ConfigError("nsr_layer index " + std::to_string(idx) +
                              " out of range (network has " + std::to_string(num_layers) +
                              " layers)");
        }
        layers.push_back(static_cast<std::size_t>(idx));
    }
    if (layers.empty()) throw ConfigError("nsr_layer list is empty");
    std::sort(layers.begin(), layers.end());
    layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
    return layers;
}

} // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("median of empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DataBundle load_data(const RunConfig& cfg) {
    cfg.validate();
    DataBundle bundle;
    if (cfg.dataset == "mnist") {
        if (cfg.mnist_dir.empty()) throw ConfigError("dataset = mnist requires mnist_dir");
        Dataset full = load_idx(path_join(cfg.mnist_dir, "train-images-idx3-ubyte"),
                                path_join(cfg.mnist_dir, "train-labels-idx1-ubyte"));
        full.split = Split::Train;
        if (cfg.use_val_split) {
            auto [train, val] = mnist_split(full, cfg.seed);
            bundle.train = std::move(train);
            bundle.val = std::move(val);
        } else {
            bundle.train = std::move(full);
        }
        Dataset test = load_idx(path_join(cfg.mnist_dir, "t10k-images-idx3-ubyte"),
                                path_join(cfg.mnist_dir, "t10k-labels-idx1-ubyte"));
        test.split = Split::Test;
        bundle.test = std::move(test);
    } else {
        const Matrix2D centers =
            blob_grid_centers(cfg.blobs_classes, cfg.blobs_dim, cfg.blobs_spread);
        bundle.train = gaussian_blobs(centers, cfg.blobs_per_class, cfg.blobs_std,
                                      derive_seed(cfg.seed, 101));
        bundle.train.split = Split::Train;
        Dataset val = gaussian_blobs(centers, cfg.blobs_test_per_class, cfg.blobs_std,
                                     derive_seed(cfg.seed, 303));
        val.split = Split::Val;
        bundle.val = std::move(val);
        Dataset test = gaussian_blobs(centers, cfg.blobs_test_per_class, cfg.blobs_std,
                                      derive_seed(cfg.seed, 202));
        test.split = Split::Test;
        bundle.test = std::move(test);
    }
    return bundle;
}

Network build_network(const RunConfig& cfg, std::size_t input_dim, int num_classes) {
    const std::vector<std::size_t> hidden =
        cfg.model == "custom" ? cfg.hidden_dims : mlp_preset_hidden_dims(cfg.model);
    return Network::make_mlp(input_dim, hidden, static_cast<std::size_t>(num_classes),
                             derive_seed(cfg.seed, 11), cfg.dropout);
}

LayerResolution resolve_nsr_layers(const RunConfig& cfg, const DataBundle& data) {
    LayerResolution res;
    if (cfg.nsr_layer == "off" || cfg.nsr_lambda == 0.0) return res;

    Network probe = build_network(cfg, data.train.dim(), data.train.num_classes);
    if (cfg.nsr_layer != "auto") {
        res.targets = parse_layer_list(cfg.nsr_layer, probe.num_layers());
        return res;
    }

    // Auto: vanilla warm-up from the same init, then score every layer by
    // its aggregated intra-class response variance and take the argmax.
    RunConfig warm_cfg = cfg;
    warm_cfg.nsr_lambda = 0.0;
    warm_cfg.nsr_layer = "off";
    Trainer warm(std::move(probe), trainer_options(warm_cfg, {}), data.train);
    for (int e = 0; e < cfg.warmup_epochs; ++e) warm.run_epoch();
    res.scores = layer_variance_scores(warm.net(), scores_dataset(cfg, data), warm.priors(),
                                       cfg.nsr_exclude_zero);
    res.auto_selected = static_cast<int>(select_layer(res.scores));
    res.targets = {static_cast<std::size_t>(res.auto_selected)};
    return res;
}

namespace {

json manifest_common(const RunConfig& cfg, const LayerResolution& layers) {
    json j;
    j["config"] = config_to_map(cfg);
    j["nsr_target_layers"] = layers.targets;
    if (layers.auto_selected >= 0) {
        j["auto_selected_layer"] = layers.auto_selected;
        j["selection_scores"] = layers.scores;
    }
    j["seed"] = cfg.seed;
    return j;
}

} // namespace

RunResult train_run(const RunConfig& cfg, const DataBundle* preloaded) {
    cfg.validate();
    DataBundle local;
    if (!preloaded) local = load_data(cfg);
    const DataBundle& data = preloaded ? *preloaded : local;

    RunResult result;
    result.config = cfg;
    result.layers = resolve_nsr_layers(cfg, data);

    Network net = build_network(cfg, data.train.dim(), data.train.num_classes);
    Trainer trainer(std::move(net), trainer_options(cfg, result.layers.targets), data.train);

    // Dynamics are tracked on the first regularizer target, an explicit
    // override, or the penultimate layer for plain runs.
    const std::size_t num_layers = trainer.net().num_layers();
    std::size_t dyn_layer;
    if (cfg.dynamics_layer >= 0) {
        if (static_cast<std::size_t>(cfg.dynamics_layer) >= num_layers) {
            throw ConfigError("dynamics_layer out of range");
        }
        dyn_layer = static_cast<std::size_t>(cfg.dynamics_layer);
    } else if (!result.layers.targets.empty()) {
        dyn_layer = result.layers.targets.front();
    } else {
        dyn_layer = num_layers >= 2 ? num_layers - 2 : 0;
    }
    result.dynamics_layer = static_cast<int>(dyn_layer);

    DynamicsTracker tracker;
    double train_ce = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        train_ce = trainer.run_epoch();
        result.epoch_seconds.push_back(elapsed_seconds(t0));
        if (cfg.dynamics) {
            const double sigma = trainer.mean_layer_sigma(data.train, dyn_layer);
            const double test_err = data.test ? trainer.evaluate_error(*data.test) : -1.0;
            tracker.record(epoch, sigma, train_ce, test_err);
            if (cfg.verbose) {
                std::printf("[epoch %d/%d] ce=%.6f sigma=%.6f test_err=%.4f\n", epoch + 1,
                            cfg.epochs, train_ce, sigma, test_err);
            }
        } else if (cfg.verbose) {
            std::printf("[epoch %d/%d] ce=%.6f\n", epoch + 1, cfg.epochs, train_ce);
        }
    }

    result.dynamics = tracker.rows();
    result.final_train_ce = train_ce;
    result.final_train_error = trainer.evaluate_error(data.train);
    if (data.test) result.final_test_error = trainer.evaluate_error(*data.test);
    if (data.val) result.final_val_error = trainer.evaluate_error(*data.val);
    result.final_mean_sigma = trainer.mean_layer_sigma(data.train, dyn_layer);
    result.net = trainer.take_net();

    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        result.out_dir = cfg.out_dir;
        result.model_path = path_join(cfg.out_dir, "model.bin");
        result.net.save(result.model_path);
        if (cfg.dynamics) {
            result.dynamics_path = path_join(cfg.out_dir, "dynamics.csv");
            tracker.write_csv(result.dynamics_path);
        }

        json manifest = manifest_common(cfg, result.layers);
        manifest["dynamics_layer"] = result.dynamics_layer;
        manifest["epochs_run"] = cfg.epochs;
        manifest["epoch_seconds"] = result.epoch_seconds;
        manifest["final"] = {{"test_error", result.final_test_error},
                             {"val_error", result.final_val_error},
                             {"train_error", result.final_train_error},
                             {"train_ce", result.final_train_ce},
                             {"mean_sigma", result.final_mean_sigma}};
        manifest["artifacts"] = {{"model", "model.bin"},
                                 {"dynamics", cfg.dynamics ? "dynamics.csv" : ""}};
        result.manifest_path = path_join(cfg.out_dir, "manifest.json");
        write_json_atomic(result.manifest_path, manifest);
    }
    return result;
}

SearchResult search_run(const RunConfig& base, int trials, double lambda_min, double lambda_max,
                        const DataBundle* preloaded) {
    if (trials < 1) throw InvalidArgument("search needs at least one trial");
    if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min)) {
        throw InvalidArgument("search needs 0 < lambda_min <= lambda_max");
    }
    RunConfig cfg = base;
    if (cfg.nsr_layer == "off") cfg.nsr_layer = "auto";
    cfg.validate();

    DataBundle local;
    if (!preloaded) local = load_data(cfg);
    const DataBundle& data = preloaded ? *preloaded : local;

    SearchResult result;
    {
        // Resolve the layer once; trials only vary lambda.
        RunConfig probe_cfg = cfg;
        if (probe_cfg.nsr_lambda == 0.0) probe_cfg.nsr_lambda = 1.0;
        result.layers = resolve_nsr_layers(probe_cfg, data);
    }
    std::string layer_list;
    for (std::size_t t : result.layers.targets) {
        if (!layer_list.empty()) layer_list += ",";
        layer_list += std::to_string(t);
    }

    std::mt19937_64 rng(derive_seed(cfg.seed, 777));
    std::uniform_real_distribution<double> dist(std::log(lambda_min), std::log(lambda_max));

    for (int k = 0; k < trials; ++k) {
        const double lambda = std::exp(dist(rng));
        RunConfig trial_cfg = cfg;
        trial_cfg.nsr_lambda = lambda;
        trial_cfg.nsr_layer = layer_list;
        trial_cfg.out_dir.clear();
        trial_cfg.dynamics = false;
        SearchTrial trial;
        trial.index = k;
        trial.lambda = lambda;
        try {
            RunResult run = train_run(trial_cfg, &data);
            trial.val_error = run.final_val_error >= 0.0 ? run.final_val_error
                                                         : run.final_test_error;
            trial.test_error = run.final_test_error;
        } catch (const NumericError& e) {
            // A diverged trial stays in the table with infinite error.
            trial.val_error = std::numeric_limits<double>::infinity();
            trial.test_error = std::numeric_limits<double>::infinity();
            if (cfg.verbose) {
                std::printf("[trial %d/%d] lambda=%.5f diverged: %s\n", k + 1, trials, lambda,
                            e.what());
            }
        }
        result.trials.push_back(trial);
        if (std::isfinite(trial.val_error) &&
            (result.best_index < 0 || trial.val_error < result.best_val_error)) {
            result.best_index = k;
            result.best_lambda = lambda;
            result.best_val_error = trial.val_error;
            result.best_test_error = trial.test_error;
        }
        if (cfg.verbose && std::isfinite(trial.val_error)) {
            std::printf("[trial %d/%d] lambda=%.5f val_err=%.4f\n", k + 1, trials, lambda,
                        trial.val_error);
        }
    }
    if (result.best_index < 0) {
        throw NumericError("search: every trial diverged; narrow the lambda range");
    }

    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        result.trials_path = path_join(cfg.out_dir, "trials.csv");
        CsvWriter csv(result.trials_path, "trial,lambda,val_error,test_error");
        for (const SearchTrial& t : result.trials) {
            csv.row(t.index, t.lambda, t.val_error, t.test_error);
        }
        csv.close();

        json manifest = manifest_common(cfg, result.layers);
        manifest["trials"] = trials;
        manifest["lambda_min"] = lambda_min;
        manifest["lambda_max"] = lambda_max;
        manifest["best"] = {{"index", result.best_index},
                            {"lambda", result.best_lambda},
                            {"val_error", result.best_val_error},
                            {"test_error", result.best_test_error}};
        manifest["artifacts"] = {{"trials", "trials.csv"}};
        result.manifest_path = path_join(cfg.out_dir, "manifest.json");
        write_json_atomic(result.manifest_path, manifest);
    }
    return result;
}

AnalyzeResult analyze_run(const AnalyzeOptions& options) {
    Network net = Network::load(options.model_path);
    const std::size_t num_layers = net.num_layers();

    auto load_pair = [&](const char* images, const char* labels) {
        return load_idx(path_join(options.dataset_dir, images),
                        path_join(options.dataset_dir, labels));
    };
    Dataset train = load_pair("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
    train.num_classes = static_cast<int>(net.output_dim());
    train.validate();
    Dataset analyzed;
    if (options.split == Split::Test) {
        analyzed = load_pair("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
        analyzed.num_classes = train.num_classes;
        analyzed.validate();
    } else {
        analyzed = train;
    }

    const ClassPriors priors = ClassPriors::from_labels(train.labels, train.num_classes);
    const std::size_t layer = options.layer >= 0 ? static_cast<std::size_t>(options.layer)
                                                 : (num_layers >= 2 ? num_layers - 2 : 0);
    if (layer >= num_layers) throw InvalidArgument("analyze: layer out of range");
    const bool exclude =
        options.exclude_zero && net.layers[layer].activation == Activation::Relu;

    AnalyzeResult result;
    fs::create_directories(options.out_dir);

    const ResponseTrace trace = collect_response_trace(net, analyzed, layer, exclude);
    const VarianceReport report = variance_report(trace, priors);
    result.variance_report_path = path_join(options.out_dir, "variance_report.csv");
    write_variance_report_csv(report, result.variance_report_path);

    result.split = correctness_split(trace, priors);
    result.correctness_split_path = path_join(options.out_dir, "correctness_split.csv");
    write_correctness_split_csv(result.split, result.correctness_split_path);
    for (std::size_t j = 0; j < result.split.defined.size(); ++j) {
        if (!result.split.defined[j]) continue;
        ++result.classes_compared;
        if (result.split.correct_var[j] < result.split.incorrect_var[j]) {
            ++result.classes_correct_lower;
        }
    }

    const Dataset& scores_data =
        options.layer_scores_split == "test" ? analyzed : train;
    result.layer_scores =
        layer_variance_scores(net, scores_data, priors, options.exclude_zero);
    result.layer_scores_path = path_join(options.out_dir, "layer_scores.csv");
    write_layer_scores_csv(result.layer_scores, result.layer_scores_path);

    if (options.with_complexity) {
        const std::size_t repr_layer = options.complexity_layer >= 0
                                           ? static_cast<std::size_t>(options.complexity_layer)
                                           : num_layers - 1;
        const ResponseTrace repr =
            collect_response_trace(net, analyzed, repr_layer, /*exclude_zero=*/false);
        const ComplexityReport complexity =
            complexity_measure(repr.responses, repr.labels, options.complexity_p);
        result.complexity_value = complexity.value;
        result.complexity_path = path_join(options.out_dir, "complexity.csv");
        write_complexity_csv(complexity, result.complexity_path);
    }
    return result;
}

BenchResult bench_run(const RunConfig& cfg, const DataBundle* preloaded) {
    cfg.validate();
    DataBundle local;
    if (!preloaded) local = load_data(cfg);
    const DataBundle& data = preloaded ? *preloaded : local;

    const LayerResolution layers = resolve_nsr_layers(cfg, data);

    RunConfig vanilla_cfg = cfg;
    vanilla_cfg.nsr_lambda = 0.0;
    vanilla_cfg.nsr_layer = "off";

    Trainer vanilla(build_network(cfg, data.train.dim(), data.train.num_classes),
                    trainer_options(vanilla_cfg, {}), data.train);
    Trainer regularized(build_network(cfg, data.train.dim(), data.train.num_classes),
                        trainer_options(cfg, layers.targets), data.train);

    BenchResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        vanilla.run_epoch();
        result.vanilla_epoch_seconds.push_back(elapsed_seconds(t0));
        t0 = std::chrono::steady_clock::now();
        regularized.run_epoch();
        result.nsr_epoch_seconds.push_back(elapsed_seconds(t0));
    }
    result.vanilla_median_s = median(result.vanilla_epoch_seconds);
    result.nsr_median_s = median(result.nsr_epoch_seconds);
    result.overhead_ratio = result.nsr_median_s / result.vanilla_median_s;

    result.queue_bytes = regularized.queue_bytes();
    const auto J = static_cast<std::size_t>(data.train.num_classes);
    const auto M = static_cast<std::size_t>(cfg.nsr_queue_len);
    for (std::size_t layer : layers.targets) {
        const std::size_t n = regularized.net().layers[layer].output_dim;
        const bool per_neuron = regularized.exclusion_active(layer);
        const std::size_t count_cells = per_neuron ? J * n : J;
        // M queued batches plus the running totals.
        result.expected_queue_bytes += (M + 1) * (J * n * sizeof(double) +
                                                  count_cells * sizeof(std::int64_t));
    }

    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        json manifest = manifest_common(cfg, layers);
        manifest["vanilla_epoch_seconds"] = result.vanilla_epoch_seconds;
        manifest["nsr_epoch_seconds"] = result.nsr_epoch_seconds;
        manifest["vanilla_median_s"] = result.vanilla_median_s;
        manifest["nsr_median_s"] = result.nsr_median_s;
        manifest["overhead_ratio"] = result.overhead_ratio;
        manifest["queue_bytes"] = result.queue_bytes;
        manifest["expected_queue_bytes"] = result.expected_queue_bytes;
        result.manifest_path = path_join(cfg.out_dir, "manifest.json");
        write_json_atomic(result.manifest_path, manifest);
    }
    return result;
}

LemmaOutcome lemma_experiment(const RunConfig& base, double ce_threshold,
                              int representation_layer, double p,
                              const DataBundle* preloaded) {
    RunConfig cfg = base;
    cfg.out_dir.clear();
    cfg.dynamics = false;
    cfg.validate();
    if (cfg.dataset != "blobs") {
        throw InvalidArgument("lemma_experiment runs on the blobs toy dataset");
    }

    DataBundle local;
    if (!preloaded) local = load_data(cfg);
    const DataBundle& data = preloaded ? *preloaded : local;

    RunConfig vanilla_cfg = cfg;
    vanilla_cfg.nsr_lambda = 0.0;
    vanilla_cfg.nsr_layer = "off";

    const RunResult with_nsr = train_run(cfg, &data);
    const RunResult vanilla = train_run(vanilla_cfg, &data);

    LemmaOutcome outcome;
    outcome.nsr_final_ce = with_nsr.final_train_ce;
    outcome.vanilla_final_ce = vanilla.final_train_ce;
    outcome.nsr_converged = with_nsr.final_train_ce < ce_threshold;
    outcome.vanilla_converged = vanilla.final_train_ce < ce_threshold;

    const std::size_t repr = representation_layer >= 0
                                 ? static_cast<std::size_t>(representation_layer)
                                 : with_nsr.net.num_layers() - 1;
    const ResponseTrace nsr_trace =
        collect_response_trace(with_nsr.net, data.train, repr, /*exclude_zero=*/false);
    const ResponseTrace vanilla_trace =
        collect_response_trace(vanilla.net, data.train, repr, /*exclude_zero=*/false);
    outcome.c_nsr = complexity_measure(nsr_trace.responses, nsr_trace.labels, p).value;
    outcome.c_vanilla =
        complexity_measure(vanilla_trace.responses, vanilla_trace.labels, p).value;
    return outcome;
}

} // namespace nsr
