#include "steadiness.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace nsr {

ClassPriors ClassPriors::from_labels(std::span<const int> labels, int num_classes) {
    if (labels.empty()) throw InvalidArgument("class priors need at least one label");
    if (num_classes < 1) throw InvalidArgument("num_classes must be >= 1");
    std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw InvalidArgument("label " + std::to_string(y) + " out of range [0, " +
                                  std::to_string(num_classes) + ")");
        }
        ++counts[static_cast<std::size_t>(y)];
    }
    return from_counts(std::move(counts));
}

ClassPriors ClassPriors::from_counts(std::vector<std::int64_t> counts) {
    ClassPriors priors;
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(),
                                                             static_cast<std::int64_t>(0)));
    if (total <= 0.0) throw InvalidArgument("class priors need at least one sample");
    priors.alpha.resize(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        priors.alpha[j] = static_cast<double>(counts[j]) / total;
    }
    priors.counts = std::move(counts);
    return priors;
}

BatchClassStats batch_class_stats(const Matrix2D& responses, std::span<const int> labels,
                                  int num_classes, bool exclude_zero) {
    if (labels.size() != responses.rows) {
        throw ShapeError("batch_class_stats: label count does not match response rows");
    }
    if (!all_finite(responses)) {
        throw NumericError("batch_class_stats: responses contain non-finite values");
    }
    const std::size_t n = responses.cols;
    const auto J = static_cast<std::size_t>(num_classes);
    BatchClassStats stats;
    stats.num_classes = num_classes;
    stats.num_neurons = n;
    stats.per_neuron = exclude_zero;
    stats.sums.assign(J * n, 0.0);
    if (exclude_zero) {
        stats.neuron_counts.assign(J * n, 0);
    } else {
        stats.class_counts.assign(J, 0);
    }

    for (std::size_t i = 0; i < responses.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= num_classes) {
            throw InvalidArgument("batch_class_stats: label " + std::to_string(y) +
                                  " out of range");
        }
        const double* row = responses.data.data() + i * n;
        double* sums = stats.sums.data() + static_cast<std::size_t>(y) * n;
        if (exclude_zero) {
            std::int64_t* counts = stats.neuron_counts.data() + static_cast<std::size_t>(y) * n;
            for (std::size_t k = 0; k < n; ++k) {
                if (row[k] != 0.0) {
                    sums[k] += row[k];
                    ++counts[k];
                }
            }
        } else {
            ++stats.class_counts[static_cast<std::size_t>(y)];
            for (std::size_t k = 0; k < n; ++k) sums[k] += row[k];
        }
    }
    return stats;
}

ClassQueues::ClassQueues(int queue_len, int num_classes, std::size_t num_neurons,
                         bool per_neuron_counts)
    : queue_len_(queue_len),
      num_classes_(num_classes),
      num_neurons_(num_neurons),
      per_neuron_(per_neuron_counts) {
    if (queue_len < 1) throw InvalidArgument("queue length M must be >= 1");
    if (num_classes < 1) throw InvalidArgument("num_classes must be >= 1");
    const auto J = static_cast<std::size_t>(num_classes);
    total_counts_.assign(per_neuron_ ? J * num_neurons_ : J, 0);
    total_sums_.assign(J * num_neurons_, 0.0);
}

void ClassQueues::push(const BatchClassStats& stats) {
    if (stats.num_classes != num_classes_ || stats.num_neurons != num_neurons_ ||
        stats.per_neuron != per_neuron_) {
        throw ShapeError("ClassQueues::push: batch stats shape does not match queue");
    }
    if (batches_.size() == static_cast<std::size_t>(queue_len_)) {
        const BatchClassStats& oldest = batches_.front();
        if (per_neuron_) {
            for (std::size_t i = 0; i < total_counts_.size(); ++i) {
                total_counts_[i] -= oldest.neuron_counts[i];
            }
        } else {
            for (std::size_t j = 0; j < total_counts_.size(); ++j) {
                total_counts_[j] -= oldest.class_counts[j];
            }
        }
        for (std::size_t i = 0; i < total_sums_.size(); ++i) total_sums_[i] -= oldest.sums[i];
        batches_.pop_front();
    }
    if (per_neuron_) {
        for (std::size_t i = 0; i < total_counts_.size(); ++i) {
            total_counts_[i] += stats.neuron_counts[i];
        }
    } else {
        for (std::size_t j = 0; j < total_counts_.size(); ++j) {
            total_counts_[j] += stats.class_counts[j];
        }
    }
    for (std::size_t i = 0; i < total_sums_.size(); ++i) total_sums_[i] += stats.sums[i];
    batches_.push_back(stats);
}

std::int64_t ClassQueues::total_count(int klass, std::size_t neuron) const {
    return per_neuron_ ? total_counts_[static_cast<std::size_t>(klass) * num_neurons_ + neuron]
                       : total_counts_[static_cast<std::size_t>(klass)];
}

double ClassQueues::total_sum(int klass, std::size_t neuron) const {
    return total_sums_[static_cast<std::size_t>(klass) * num_neurons_ + neuron];
}

MeanEstimate ClassQueues::estimate_means() const {
    MeanEstimate est;
    est.means = Matrix2D(static_cast<std::size_t>(num_classes_), num_neurons_);
    est.available.assign(est.means.size(), 0);
    for (int j = 0; j < num_classes_; ++j) {
        for (std::size_t k = 0; k < num_neurons_; ++k) {
            const std::int64_t c = total_count(j, k);
            const std::size_t idx = static_cast<std::size_t>(j) * num_neurons_ + k;
            if (c > 0) {
                est.means.data[idx] = total_sums_[idx] / static_cast<double>(c);
                est.available[idx] = 1;
            }
        }
    }
    return est;
}

void ClassQueues::recompute_totals(std::vector<std::int64_t>& counts,
                                   std::vector<double>& sums) const {
    counts.assign(total_counts_.size(), 0);
    sums.assign(total_sums_.size(), 0.0);
    for (const BatchClassStats& b : batches_) {
        if (per_neuron_) {
            for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += b.neuron_counts[i];
        } else {
            for (std::size_t j = 0; j < counts.size(); ++j) counts[j] += b.class_counts[j];
        }
        for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += b.sums[i];
    }
}

std::size_t ClassQueues::allocated_bytes() const {
    std::size_t bytes = total_counts_.capacity() * sizeof(std::int64_t) +
                        total_sums_.capacity() * sizeof(double);
    for (const BatchClassStats& b : batches_) {
        bytes += b.class_counts.capacity() * sizeof(std::int64_t);
        bytes += b.neuron_counts.capacity() * sizeof(std::int64_t);
        bytes += b.sums.capacity() * sizeof(double);
    }
    return bytes;
}

NsrLossResult nsr_loss_and_grads(const Matrix2D& responses, std::span<const int> labels,
                                 const ClassPriors& priors, const MeanEstimate& means,
                                 double lambda, GradientMode mode, bool exclude_zero) {
    if (labels.size() != responses.rows) {
        throw ShapeError("nsr_loss_and_grads: label count does not match response rows");
    }
    if (means.means.cols != responses.cols) {
        throw ShapeError("nsr_loss_and_grads: mean estimate has " +
                         std::to_string(means.means.cols) + " neurons, responses have " +
                         std::to_string(responses.cols));
    }
    const std::size_t n = responses.cols;
    const std::size_t b = responses.rows;
    const auto J = static_cast<std::size_t>(priors.num_classes());

    NsrLossResult result;
    result.per_neuron.assign(n, 0.0);
    result.response_grads = Matrix2D(b, n);

    // Count contributing samples per (class, neuron) in this batch.
    std::vector<double> batch_counts(J * n, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= J) {
            throw InvalidArgument("nsr_loss_and_grads: label out of range");
        }
        const double* row = responses.data.data() + i * n;
        double* counts = batch_counts.data() + static_cast<std::size_t>(y) * n;
        for (std::size_t k = 0; k < n; ++k) {
            if (!exclude_zero || row[k] != 0.0) counts[k] += 1.0;
        }
    }

    if (mode == GradientMode::DetachedMean) {
        for (std::size_t i = 0; i < b; ++i) {
            const auto y = static_cast<std::size_t>(labels[i]);
            const double aj = priors.alpha[y];
            if (aj == 0.0) continue;
            const double* row = responses.data.data() + i * n;
            double* grad = result.response_grads.data.data() + i * n;
            const double* mu = means.means.data.data() + y * n;
            const std::uint8_t* avail = means.available.data() + y * n;
            const double* counts = batch_counts.data() + y * n;
            for (std::size_t k = 0; k < n; ++k) {
                if (!avail[k]) continue;
                if (exclude_zero && row[k] == 0.0) continue;
                const double dev = row[k] - mu[k];
                const double inv = 1.0 / counts[k];
                result.per_neuron[k] += aj * dev * dev * inv;
                grad[k] = 2.0 * lambda * aj * dev * inv;
            }
        }
    } else {
        // Within-batch population variance; the per-class batch mean is part
        // of the computation graph, but the same cancellation as in the
        // analytic variance gradient gives d/dx_i = 2*(x_i - mean)/n_j.
        std::vector<double> batch_sums(J * n, 0.0);
        for (std::size_t i = 0; i < b; ++i) {
            const auto y = static_cast<std::size_t>(labels[i]);
            const double* row = responses.data.data() + i * n;
            double* sums = batch_sums.data() + y * n;
            for (std::size_t k = 0; k < n; ++k) {
                if (!exclude_zero || row[k] != 0.0) sums[k] += row[k];
            }
        }
        for (std::size_t i = 0; i < b; ++i) {
            const auto y = static_cast<std::size_t>(labels[i]);
            const double aj = priors.alpha[y];
            if (aj == 0.0) continue;
            const double* row = responses.data.data() + i * n;
            double* grad = result.response_grads.data.data() + i * n;
            const double* counts = batch_counts.data() + y * n;
            const double* sums = batch_sums.data() + y * n;
            for (std::size_t k = 0; k < n; ++k) {
                if (exclude_zero && row[k] == 0.0) continue;
                if (counts[k] <= 0.0) continue;
                const double mean = sums[k] / counts[k];
                const double dev = row[k] - mean;
                const double inv = 1.0 / counts[k];
                result.per_neuron[k] += aj * dev * dev * inv;
                grad[k] = 2.0 * lambda * aj * dev * inv;
            }
        }
    }

    for (double s : result.per_neuron) result.value += s;
    result.value *= lambda;
    return result;
}

std::vector<double> nsr_exact_sigma(const Matrix2D& responses, std::span<const int> labels,
                                    const ClassPriors& priors, bool exclude_zero) {
    if (labels.size() != responses.rows) {
        throw ShapeError("nsr_exact_sigma: label count does not match response rows");
    }
    const std::size_t n = responses.cols;
    const auto J = static_cast<std::size_t>(priors.num_classes());

    // First pass: per-(class, neuron) contributing counts and means.
    std::vector<double> counts(J * n, 0.0);
    std::vector<double> means(J * n, 0.0);
    for (std::size_t i = 0; i < responses.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= J) {
            throw InvalidArgument("nsr_exact_sigma: label out of range");
        }
        const double* row = responses.data.data() + i * n;
        double* c = counts.data() + static_cast<std::size_t>(y) * n;
        double* m = means.data() + static_cast<std::size_t>(y) * n;
        for (std::size_t k = 0; k < n; ++k) {
            if (!exclude_zero || row[k] != 0.0) {
                c[k] += 1.0;
                m[k] += row[k];
            }
        }
    }
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (counts[i] > 0.0) means[i] /= counts[i];
    }

    // Second pass: mean squared deviation from the class mean.
    std::vector<double> sqdev(J * n, 0.0);
    for (std::size_t i = 0; i < responses.rows; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const double* row = responses.data.data() + i * n;
        const double* m = means.data() + y * n;
        double* s = sqdev.data() + y * n;
        for (std::size_t k = 0; k < n; ++k) {
            if (!exclude_zero || row[k] != 0.0) {
                const double dev = row[k] - m[k];
                s[k] += dev * dev;
            }
        }
    }

    std::vector<double> sigma(n, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        const double aj = priors.alpha[j];
        if (aj == 0.0) continue;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t idx = j * n + k;
            if (counts[idx] > 0.0) sigma[k] += aj * sqdev[idx] / counts[idx];
        }
    }
    return sigma;
}

} // namespace nsr
