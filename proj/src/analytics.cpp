#include "analytics.hpp"

#include <algorithm>
#include <cmath>

#include "csv.hpp"

namespace nsr {

void ResponseTrace::validate() const {
    if (labels.size() != responses.rows) {
        throw ShapeError("response trace: label count does not match response rows");
    }
    if (!correct.empty() && correct.size() != responses.rows) {
        throw ShapeError("response trace: correctness flag count does not match rows");
    }
    if (responses.rows == 0) throw InvalidArgument("response trace is empty");
}

ClassResponseStats::ClassResponseStats(int num_classes, std::size_t num_neurons)
    : num_classes_(num_classes), num_neurons_(num_neurons) {
    if (num_classes < 1) throw InvalidArgument("num_classes must be >= 1");
    const std::size_t cells = static_cast<std::size_t>(num_classes) * num_neurons;
    count_.assign(cells, 0.0);
    sum_.assign(cells, 0.0);
    sumsq_.assign(cells, 0.0);
}

void ClassResponseStats::add(const Matrix2D& responses, std::span<const int> labels,
                             bool exclude_zero) {
    if (responses.cols != num_neurons_) {
        throw ShapeError("class response stats: neuron count mismatch");
    }
    if (labels.size() != responses.rows) {
        throw ShapeError("class response stats: label count mismatch");
    }
    for (std::size_t i = 0; i < responses.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= num_classes_) {
            throw InvalidArgument("class response stats: label out of range");
        }
        const double* row = responses.data.data() + i * num_neurons_;
        const std::size_t base = static_cast<std::size_t>(y) * num_neurons_;
        for (std::size_t k = 0; k < num_neurons_; ++k) {
            const double x = row[k];
            if (exclude_zero && x == 0.0) continue;
            count_[base + k] += 1.0;
            sum_[base + k] += x;
            sumsq_[base + k] += x * x;
        }
    }
}

void ClassResponseStats::variances(Matrix2D& var_out, std::vector<std::uint8_t>& mask_out) const {
    // N x J layout (neuron-major) to match VarianceReport.
    var_out = Matrix2D(num_neurons_, static_cast<std::size_t>(num_classes_));
    mask_out.assign(var_out.size(), 0);
    for (int j = 0; j < num_classes_; ++j) {
        const std::size_t base = static_cast<std::size_t>(j) * num_neurons_;
        for (std::size_t k = 0; k < num_neurons_; ++k) {
            const double c = count_[base + k];
            if (c <= 0.0) continue;
            const double mean = sum_[base + k] / c;
            const double var = std::max(0.0, sumsq_[base + k] / c - mean * mean);
            var_out(k, static_cast<std::size_t>(j)) = var;
            mask_out[k * static_cast<std::size_t>(num_classes_) + static_cast<std::size_t>(j)] = 1;
        }
    }
}

std::vector<double> ClassResponseStats::sigma(const ClassPriors& priors) const {
    if (priors.num_classes() != num_classes_) {
        throw ShapeError("class response stats: prior class count mismatch");
    }
    std::vector<double> out(num_neurons_, 0.0);
    for (int j = 0; j < num_classes_; ++j) {
        const double aj = priors.alpha[static_cast<std::size_t>(j)];
        if (aj == 0.0) continue;
        const std::size_t base = static_cast<std::size_t>(j) * num_neurons_;
        for (std::size_t k = 0; k < num_neurons_; ++k) {
            const double c = count_[base + k];
            if (c <= 0.0) continue;
            const double mean = sum_[base + k] / c;
            out[k] += aj * std::max(0.0, sumsq_[base + k] / c - mean * mean);
        }
    }
    return out;
}

VarianceReport variance_report(const ResponseTrace& trace, const ClassPriors& priors) {
    trace.validate();
    const std::size_t n = trace.responses.cols;
    const auto J = static_cast<std::size_t>(priors.num_classes());

    ClassResponseStats stats(priors.num_classes(), n);
    stats.add(trace.responses, trace.labels, trace.exclude_zero);

    VarianceReport report;
    stats.variances(report.per_cell, report.cell_mask);
    report.sigma.assign(n, 0.0);
    report.per_class.assign(J, 0.0);

    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < J; ++j) {
            if (report.cell_defined(k, j)) {
                report.sigma[k] += priors.alpha[j] * report.per_cell(k, j);
            }
        }
        report.layer_total += report.sigma[k];
    }
    for (std::size_t j = 0; j < J; ++j) {
        double total = 0.0;
        std::size_t defined = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (report.cell_defined(k, j)) {
                total += report.per_cell(k, j);
                ++defined;
            }
        }
        report.per_class[j] = defined > 0 ? total / static_cast<double>(defined) : 0.0;
    }
    return report;
}

CorrectnessSplit correctness_split(const ResponseTrace& trace, const ClassPriors& priors) {
    trace.validate();
    if (trace.correct.empty()) {
        throw InvalidArgument("correctness_split needs correctness flags");
    }
    const auto J = static_cast<std::size_t>(priors.num_classes());
    const std::size_t n = trace.responses.cols;

    ClassResponseStats correct_stats(priors.num_classes(), n);
    ClassResponseStats incorrect_stats(priors.num_classes(), n);
    // Feed rows one at a time into the matching split.
    Matrix2D row(1, n);
    std::vector<int> label(1);
    for (std::size_t i = 0; i < trace.responses.rows; ++i) {
        std::copy_n(trace.responses.data.data() + i * n, n, row.data.data());
        label[0] = trace.labels[i];
        (trace.correct[i] ? correct_stats : incorrect_stats)
            .add(row, label, trace.exclude_zero);
    }

    auto per_class_mean = [&](const ClassResponseStats& stats, std::vector<double>& out,
                              std::vector<std::uint8_t>& has) {
        Matrix2D var;
        std::vector<std::uint8_t> mask;
        stats.variances(var, mask);
        out.assign(J, 0.0);
        has.assign(J, 0);
        for (std::size_t j = 0; j < J; ++j) {
            double total = 0.0;
            std::size_t defined = 0;
            for (std::size_t k = 0; k < n; ++k) {
                if (mask[k * J + j]) {
                    total += var(k, j);
                    ++defined;
                }
            }
            if (defined > 0) {
                out[j] = total / static_cast<double>(defined);
                has[j] = 1;
            }
        }
    };

    CorrectnessSplit split;
    std::vector<std::uint8_t> has_correct, has_incorrect;
    per_class_mean(correct_stats, split.correct_var, has_correct);
    per_class_mean(incorrect_stats, split.incorrect_var, has_incorrect);
    split.defined.assign(J, 0);
    for (std::size_t j = 0; j < J; ++j) {
        split.defined[j] = (has_correct[j] && has_incorrect[j]) ? 1 : 0;
    }
    return split;
}

std::vector<double> layer_variance_scores(const Network& net, const Dataset& data,
                                          const ClassPriors& priors, bool exclude_zero_relu,
                                          ScoreAggregate aggregate) {
    if (data.size() == 0) throw InvalidArgument("layer_variance_scores: empty dataset");
    const std::size_t num_layers = net.num_layers();
    std::vector<ClassResponseStats> per_layer;
    per_layer.reserve(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) {
        per_layer.emplace_back(priors.num_classes(), net.layers[l].output_dim);
    }

    constexpr std::size_t kChunk = 1024;
    Matrix2D chunk;
    std::vector<int> labels;
    for (std::size_t begin = 0; begin < data.size(); begin += kChunk) {
        const std::size_t take = std::min(kChunk, data.size() - begin);
        chunk = Matrix2D(take, data.dim());
        std::copy_n(data.features.data.data() + begin * data.dim(), take * data.dim(),
                    chunk.data.data());
        labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      data.labels.begin() + static_cast<std::ptrdiff_t>(begin + take));
        ForwardTrace trace = forward(net, chunk, /*train_mode=*/false, /*rng_seed=*/0);
        for (std::size_t l = 0; l < num_layers; ++l) {
            const bool exclude =
                exclude_zero_relu && net.layers[l].activation == Activation::Relu;
            per_layer[l].add(layer_response(net, trace, l), labels, exclude);
        }
    }

    std::vector<double> scores(num_layers, 0.0);
    for (std::size_t l = 0; l < num_layers; ++l) {
        const std::vector<double> sigma = per_layer[l].sigma(priors);
        double total = 0.0;
        for (double s : sigma) total += s;
        scores[l] = aggregate == ScoreAggregate::Sum
                        ? total
                        : total / static_cast<double>(sigma.size());
    }
    return scores;
}

std::size_t select_layer(std::span<const double> scores) {
    if (scores.empty()) throw InvalidArgument("select_layer: no scores");
    std::size_t best = 0;
    for (std::size_t l = 1; l < scores.size(); ++l) {
        if (scores[l] > scores[best]) best = l; // strict: ties keep the lowest index
    }
    return best;
}

std::vector<double> variance_ratio(std::span<const double> totals_nsr,
                                   std::span<const double> totals_vanilla,
                                   std::vector<std::uint8_t>* mask) {
    if (totals_nsr.size() != totals_vanilla.size()) {
        throw ShapeError("variance_ratio: layer count mismatch");
    }
    std::vector<double> ratio(totals_nsr.size(), 0.0);
    if (mask) mask->assign(totals_nsr.size(), 0);
    for (std::size_t l = 0; l < totals_nsr.size(); ++l) {
        if (totals_vanilla[l] > 0.0) {
            ratio[l] = totals_nsr[l] / totals_vanilla[l];
            if (mask) (*mask)[l] = 1;
        }
    }
    return ratio;
}

void DynamicsTracker::record(int epoch, double mean_variance, double ce_loss, double test_error) {
    if (!rows_.empty() && epoch <= rows_.back().epoch) {
        throw InvalidArgument("dynamics rows must be recorded in increasing epoch order");
    }
    rows_.push_back({epoch, mean_variance, ce_loss, test_error});
}

void DynamicsTracker::write_csv(const std::string& path) const {
    CsvWriter csv(path, "epoch,mean_variance,ce_loss,test_error");
    for (const DynamicsRow& r : rows_) {
        csv.row(r.epoch, r.mean_variance, r.ce_loss, r.test_error);
    }
    csv.close();
}

void write_variance_report_csv(const VarianceReport& report, const std::string& path) {
    CsvWriter csv(path, "neuron,class,variance");
    for (std::size_t k = 0; k < report.per_cell.rows; ++k) {
        for (std::size_t j = 0; j < report.per_cell.cols; ++j) {
            if (report.cell_defined(k, j)) csv.row(k, j, report.per_cell(k, j));
        }
    }
    csv.close();
}

void write_layer_scores_csv(std::span<const double> scores, const std::string& path) {
    CsvWriter csv(path, "layer,score");
    for (std::size_t l = 0; l < scores.size(); ++l) csv.row(l, scores[l]);
    csv.close();
}

void write_correctness_split_csv(const CorrectnessSplit& split, const std::string& path) {
    CsvWriter csv(path, "class,correct_var,incorrect_var");
    for (std::size_t j = 0; j < split.defined.size(); ++j) {
        if (split.defined[j]) csv.row(j, split.correct_var[j], split.incorrect_var[j]);
    }
    csv.close();
}

} // namespace nsr
