#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "matrix.hpp"

namespace nsr {

/// Class prior weights alpha_j = z_j / sum_i z_i derived from training-set
/// label counts. Not a hyperparameter; classes absent from the data get
/// alpha = 0.
struct ClassPriors {
    std::vector<std::int64_t> counts;
    std::vector<double> alpha;

    static ClassPriors from_labels(std::span<const int> labels, int num_classes);
    static ClassPriors from_counts(std::vector<std::int64_t> counts);
    int num_classes() const { return static_cast<int>(alpha.size()); }
};

/// One mini-batch's per-class instance counts and per-neuron response sums.
///
/// Without zero exclusion, counts are per-class scalars (`class_counts`).
/// With zero exclusion, a sample contributes to neuron n's count only when
/// its response at n is nonzero, so counts become per-(class, neuron)
/// (`neuron_counts`, J x N row-major). Response sums are unaffected by the
/// flag since excluded responses are exactly zero.
struct BatchClassStats {
    int num_classes = 0;
    std::size_t num_neurons = 0;
    bool per_neuron = false;
    std::vector<std::int64_t> class_counts;  // J (empty when per_neuron)
    std::vector<std::int64_t> neuron_counts; // J*N (empty when !per_neuron)
    std::vector<double> sums;                // J*N row-major

    std::int64_t count(int klass, std::size_t neuron) const {
        return per_neuron ? neuron_counts[static_cast<std::size_t>(klass) * num_neurons + neuron]
                          : class_counts[static_cast<std::size_t>(klass)];
    }
    double sum(int klass, std::size_t neuron) const {
        return sums[static_cast<std::size_t>(klass) * num_neurons + neuron];
    }
};

BatchClassStats batch_class_stats(const Matrix2D& responses, std::span<const int> labels,
                                  int num_classes, bool exclude_zero);

/// Per-class per-neuron mean estimates from the queue totals. An entry is
/// defined iff its (class or per-neuron) count is positive; undefined
/// entries are masked, never NaN.
struct MeanEstimate {
    Matrix2D means;                      // J x N
    std::vector<std::uint8_t> available; // J*N
    bool defined(int klass, std::size_t neuron) const {
        return available[static_cast<std::size_t>(klass) * means.cols + neuron] != 0;
    }
};

/// Ring buffer over the latest M batches of class counts and response sums,
/// with incrementally maintained running totals C_j and S_j^(n). The totals
/// stay exact for counts and drift at most rounding error for sums; both are
/// checked against full recomputation in the tests.
class ClassQueues {
public:
    ClassQueues(int queue_len, int num_classes, std::size_t num_neurons, bool per_neuron_counts);

    /// Appends a batch, evicting the oldest one once M batches are held.
    void push(const BatchClassStats& stats);

    MeanEstimate estimate_means() const;

    std::int64_t total_count(int klass, std::size_t neuron = 0) const;
    double total_sum(int klass, std::size_t neuron) const;

    /// Recomputes the totals from the retained batches (the oracle route
    /// for the incremental update).
    void recompute_totals(std::vector<std::int64_t>& counts, std::vector<double>& sums) const;

    int queue_len() const { return queue_len_; }
    std::size_t size() const { return batches_.size(); }
    int num_classes() const { return num_classes_; }
    std::size_t num_neurons() const { return num_neurons_; }
    bool per_neuron_counts() const { return per_neuron_; }

    /// Bytes held by the queue buffers and totals; the space cost is
    /// O(N * J * M).
    std::size_t allocated_bytes() const;

private:
    int queue_len_;
    int num_classes_;
    std::size_t num_neurons_;
    bool per_neuron_;
    std::deque<BatchClassStats> batches_;
    std::vector<std::int64_t> total_counts_; // J or J*N
    std::vector<double> total_sums_;         // J*N
};

enum class GradientMode {
    DetachedMean,  // class means from the queue are constants during backprop
    BatchVariance, // within-batch population variance with full gradient flow
};

struct NsrConfig {
    double lambda = 0.0;
    int queue_len = 5;
    std::vector<std::size_t> target_layers;
    bool exclude_zero_relu = true; // exclusion applies on ReLU target layers
    GradientMode gradient_mode = GradientMode::DetachedMean;
};

/// Batch estimate of the steadiness term for one target layer, plus the
/// gradients w.r.t. the layer responses.
///
/// DetachedMean: loss = lambda * sum_n sum_j alpha_j * (1/n_j) *
/// sum_{counted samples of class j} (x - E_hat[X_{n,j}])^2 with E_hat held
/// constant; gradient 2*lambda*alpha_j*(x - E_hat)/n_j per counted sample.
/// n_j is the number of contributing samples of class j in this batch
/// (per neuron when exclusion is active). Classes without an available mean
/// contribute nothing.
///
/// BatchVariance: the within-batch population variance per class with the
/// mean treated as a function of the batch (validation mode).
struct NsrLossResult {
    double value = 0.0;
    std::vector<double> per_neuron; // sigma_hat contributions, value = lambda * sum(per_neuron)
    Matrix2D response_grads;        // B x N
};

NsrLossResult nsr_loss_and_grads(const Matrix2D& responses, std::span<const int> labels,
                                 const ClassPriors& priors, const MeanEstimate& means,
                                 double lambda, GradientMode mode, bool exclude_zero);

/// Reference oracle: exact population-variance evaluation of
/// sigma_n = sum_j alpha_j * Var(X_{n,j}) over a full dataset, two-pass
/// (mean, then mean squared deviation). Classes with no contributing sample
/// at a neuron are omitted from that neuron's sum.
std::vector<double> nsr_exact_sigma(const Matrix2D& responses, std::span<const int> labels,
                                    const ClassPriors& priors, bool exclude_zero = false);

} // namespace nsr
