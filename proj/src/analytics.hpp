#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "matrix.hpp"
#include "network.hpp"
#include "steadiness.hpp"

namespace nsr {

/// Recorded responses of one layer over a sample set.
struct ResponseTrace {
    std::size_t layer_index = 0;
    Matrix2D responses; // samples x N
    std::vector<int> labels;
    std::vector<std::uint8_t> correct; // optional, empty when unknown
    bool exclude_zero = false;         // exclusion applied when the trace is analyzed

    void validate() const;
};

/// Streaming per-(class, neuron) response statistics: contributing counts,
/// sums and sums of squares. Feeds the large-sweep analytics without
/// materializing whole-dataset traces; variances come out via the
/// E[X^2] - E^2[X] decomposition.
class ClassResponseStats {
public:
    ClassResponseStats(int num_classes, std::size_t num_neurons);

    void add(const Matrix2D& responses, std::span<const int> labels, bool exclude_zero);

    /// Population variance per (neuron, class); mask = 1 where at least one
    /// sample contributed.
    void variances(Matrix2D& var_out, std::vector<std::uint8_t>& mask_out) const;

    std::vector<double> sigma(const ClassPriors& priors) const;

    int num_classes() const { return num_classes_; }
    std::size_t num_neurons() const { return num_neurons_; }

private:
    int num_classes_;
    std::size_t num_neurons_;
    std::vector<double> count_, sum_, sumsq_; // J*N each
};

/// Per-neuron per-class intra-class variance table with aggregates.
struct VarianceReport {
    Matrix2D per_cell;                   // N x J population variances
    std::vector<std::uint8_t> cell_mask; // N*J, 1 where defined
    std::vector<double> sigma;           // per neuron, alpha-weighted over classes
    std::vector<double> per_class;       // mean over neurons with a defined cell
    double layer_total = 0.0;            // sum of sigma over neurons

    bool cell_defined(std::size_t neuron, std::size_t klass) const {
        return cell_mask[neuron * per_cell.cols + klass] != 0;
    }
};

VarianceReport variance_report(const ResponseTrace& trace, const ClassPriors& priors);

/// Per-class intra-class variance aggregated (mean over neurons) separately
/// over correctly and incorrectly classified samples. Classes with an empty
/// split are masked.
struct CorrectnessSplit {
    std::vector<double> correct_var;
    std::vector<double> incorrect_var;
    std::vector<std::uint8_t> defined; // both splits non-empty
};

CorrectnessSplit correctness_split(const ResponseTrace& trace, const ClassPriors& priors);

enum class ScoreAggregate { Sum, Mean };

/// Full forward sweep (eval mode, chunked) scoring every layer by its
/// aggregated neuron intra-class response variance. When exclude_zero_relu
/// is set, exclusion applies on ReLU layers only.
std::vector<double> layer_variance_scores(const Network& net, const Dataset& data,
                                          const ClassPriors& priors, bool exclude_zero_relu,
                                          ScoreAggregate aggregate = ScoreAggregate::Sum);

/// Argmax with ties broken by the lowest layer index.
std::size_t select_layer(std::span<const double> scores);

/// Ratio of layer variance totals, regularized model over vanilla.
/// mask[l] = 0 where the vanilla total is zero (ratio undefined).
std::vector<double> variance_ratio(std::span<const double> totals_nsr,
                                   std::span<const double> totals_vanilla,
                                   std::vector<std::uint8_t>* mask = nullptr);

/// Per-epoch training record: mean sigma_n over the tracked layer's neurons
/// (training set), mean cross-entropy, and test error.
struct DynamicsRow {
    int epoch = 0;
    double mean_variance = 0.0;
    double ce_loss = 0.0;
    double test_error = 0.0;
};

class DynamicsTracker {
public:
    void record(int epoch, double mean_variance, double ce_loss, double test_error);
    const std::vector<DynamicsRow>& rows() const { return rows_; }
    void write_csv(const std::string& path) const;

private:
    std::vector<DynamicsRow> rows_;
};

// Report serialization (headers mandatory, UTF-8, '.' decimal separator).
void write_variance_report_csv(const VarianceReport& report, const std::string& path);
void write_layer_scores_csv(std::span<const double> scores, const std::string& path);
void write_correctness_split_csv(const CorrectnessSplit& split, const std::string& path);

} // namespace nsr
