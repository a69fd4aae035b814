// Experiment CLI for the steadiness-regularized training engine. Talks to
// the engine exclusively through the public C interface in nsr/nsr.h.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nsr/nsr.h"

namespace {

struct ConfigDeleter {
    void operator()(nsr_config* c) const { nsr_config_free(c); }
};
using ConfigPtr = std::unique_ptr<nsr_config, ConfigDeleter>;

int die(nsr_status status, const char* what) {
    std::fprintf(stderr, "error: %s failed (%s): %s\n", what, nsr_status_name(status),
                 nsr_last_error());
    return 1;
}

ConfigPtr load_config(const std::string& path, nsr_status& status) {
    nsr_config* raw = nullptr;
    status = path.empty() ? nsr_config_create(&raw) : nsr_config_load(path.c_str(), &raw);
    return ConfigPtr(raw);
}

int apply_overrides(nsr_config* cfg, const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [key, value] : kv) {
        if (nsr_status s = nsr_config_set(cfg, key.c_str(), value.c_str()); s != NSR_OK) {
            return die(s, "config override");
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neuron-steadiness regularization experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string seed, lambda, queue_len, nsr_layer, out_dir, epochs;
    bool quiet = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key = value config file");
        cmd->add_option("--seed", seed, "run seed");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--out", out_dir, "output directory for artifacts");
        cmd->add_option("--set", sets, "extra key=value overrides")->take_all();
        cmd->add_flag("--quiet", quiet, "suppress per-epoch progress");
    };

    CLI::App* train = app.add_subcommand("train", "train one model per the config");
    add_common(train);
    train->add_option("--lambda", lambda, "regularization intensity");
    train->add_option("--queue-len", queue_len, "memory queue length M");
    train->add_option("--nsr-layer", nsr_layer, "target layer: auto, off or index list");

    CLI::App* search = app.add_subcommand("search", "random search over lambda");
    add_common(search);
    int trials = 8;
    double lambda_min = 0.01, lambda_max = 10.0;
    search->add_option("--trials", trials, "number of sampled lambdas");
    search->add_option("--lambda-min", lambda_min, "lower bound of the search range");
    search->add_option("--lambda-max", lambda_max, "upper bound of the search range");
    search->add_option("--nsr-layer", nsr_layer, "target layer: auto, off or index list");

    CLI::App* analyze = app.add_subcommand("analyze", "emit report CSVs for a trained model");
    std::string model_path, dataset_dir, split = "test";
    std::string analyze_out = ".";
    int layer = -1, complexity_layer = -1;
    bool with_complexity = false, include_zero = false;
    analyze->add_option("--model", model_path, "model file")->required();
    analyze->add_option("--dataset", dataset_dir, "directory with the IDX files")->required();
    analyze->add_option("--split", split, "train or test (default test)");
    analyze->add_option("--layer", layer, "analyzed layer (default penultimate)");
    analyze->add_flag("--complexity", with_complexity, "also emit complexity.csv");
    analyze->add_option("--complexity-layer", complexity_layer,
                        "representation layer for the complexity measure (default final)");
    analyze->add_flag("--include-zero", include_zero,
                      "keep zero ReLU responses in the statistics");
    analyze->add_option("--out", analyze_out, "output directory for the CSVs");

    CLI::App* bench = app.add_subcommand("bench", "vanilla vs regularized per-epoch wall-clock");
    add_common(bench);

    CLI11_PARSE(app, argc, argv);

    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return 1;
        }
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!seed.empty()) overrides.emplace_back("seed", seed);
    if (!epochs.empty()) overrides.emplace_back("epochs", epochs);
    if (!out_dir.empty()) overrides.emplace_back("out_dir", out_dir);
    if (!lambda.empty()) overrides.emplace_back("nsr_lambda", lambda);
    if (!queue_len.empty()) overrides.emplace_back("nsr_queue_len", queue_len);
    if (!nsr_layer.empty()) overrides.emplace_back("nsr_layer", nsr_layer);
    if (!quiet) overrides.emplace_back("verbose", "1");

    if (analyze->parsed()) {
        nsr_analyze_summary summary{};
        nsr_status s = nsr_run_analyze(model_path.c_str(), dataset_dir.c_str(), split.c_str(),
                                       analyze_out.c_str(), layer, include_zero ? 0 : 1,
                                       with_complexity ? 1 : 0, complexity_layer, &summary);
        if (s != NSR_OK) return die(s, "analyze");
        std::printf("reports written to %s\n", analyze_out.c_str());
        std::printf("correct-split variance lower for %d of %d classes\n",
                    summary.classes_correct_lower, summary.classes_compared);
        if (with_complexity) std::printf("complexity C = %.6f\n", summary.complexity);
        return 0;
    }

    nsr_status status = NSR_OK;
    ConfigPtr cfg = load_config(config_path, status);
    if (!cfg) return die(status, "config load");
    if (int rc = apply_overrides(cfg.get(), overrides); rc != 0) return rc;

    if (train->parsed()) {
        nsr_train_summary summary{};
        if (nsr_status s = nsr_run_train(cfg.get(), &summary, nullptr); s != NSR_OK) {
            return die(s, "train");
        }
        if (summary.auto_selected_layer >= 0) {
            std::printf("auto-selected nsr layer: %d\n", summary.auto_selected_layer);
        }
        std::printf("final train ce %.6f, train err %.4f", summary.train_ce,
                    summary.train_error);
        if (summary.val_error >= 0) std::printf(", val err %.4f", summary.val_error);
        if (summary.test_error >= 0) std::printf(", test err %.4f", summary.test_error);
        std::printf("\n");
        return 0;
    }

    if (search->parsed()) {
        nsr_search_summary summary{};
        if (nsr_status s =
                nsr_run_search(cfg.get(), trials, lambda_min, lambda_max, &summary);
            s != NSR_OK) {
            return die(s, "search");
        }
        std::printf("best lambda %.6f (trial %d/%d): val err %.4f, test err %.4f\n",
                    summary.best_lambda, summary.best_trial + 1, summary.trials,
                    summary.best_val_error, summary.best_test_error);
        return 0;
    }

    if (bench->parsed()) {
        nsr_bench_summary summary{};
        if (nsr_status s = nsr_run_bench(cfg.get(), &summary); s != NSR_OK) {
            return die(s, "bench");
        }
        std::printf("vanilla median %.3fs/epoch, with regularizer %.3fs/epoch, ratio %.3f\n",
                    summary.vanilla_median_s, summary.nsr_median_s, summary.overhead_ratio);
        std::printf("queue memory %zu bytes (model predicts %zu)\n", summary.queue_bytes,
                    summary.expected_queue_bytes);
        return 0;
    }

    return 0;
}
