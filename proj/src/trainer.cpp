#include "trainer.hpp"

#include <algorithm>
#include <cmath>

namespace nsr {

namespace {

constexpr std::size_t kEvalChunk = 1024;

Matrix2D dataset_chunk(const Dataset& data, std::size_t begin, std::size_t count) {
    Matrix2D chunk(count, data.dim());
    std::copy_n(data.features.data.data() + begin * data.dim(), count * data.dim(),
                chunk.data.data());
    return chunk;
}

} // namespace

Trainer::Trainer(Network initial_net, Options options, const Dataset& train_data)
    : net_(std::move(initial_net)),
      options_(std::move(options)),
      train_(&train_data),
      priors_(ClassPriors::from_labels(train_data.labels, train_data.num_classes)),
      nsr_(options_.nsr),
      iterator_(train_data, options_.batch_size, options_.seed) {
    net_.validate();
    train_data.validate();
    if (train_data.dim() != net_.input_dim()) {
        throw ShapeError("trainer: dataset dim does not match network input dim");
    }
    if (static_cast<std::size_t>(train_data.num_classes) != net_.output_dim()) {
        throw ShapeError("trainer: class count does not match network output dim");
    }
    if (nsr_.lambda < 0.0) throw InvalidArgument("nsr lambda must be >= 0");
    std::sort(nsr_.target_layers.begin(), nsr_.target_layers.end());
    for (std::size_t layer : nsr_.target_layers) {
        if (layer >= net_.num_layers()) {
            throw ConfigError("nsr target layer " + std::to_string(layer) +
                              " does not exist (network has " +
                              std::to_string(net_.num_layers()) + " layers)");
        }
        queues_.push_back(std::make_unique<ClassQueues>(
            nsr_.queue_len, train_data.num_classes, net_.layers[layer].output_dim,
            exclusion_active(layer)));
    }
}

bool Trainer::exclusion_active(std::size_t layer) const {
    return nsr_.exclude_zero_relu && net_.layers[layer].activation == Activation::Relu;
}

std::size_t Trainer::queue_bytes() const {
    std::size_t total = 0;
    for (const auto& q : queues_) total += q->allocated_bytes();
    return total;
}

double Trainer::run_epoch() {
    iterator_.start_epoch(static_cast<std::uint64_t>(epoch_));
    double ce_total = 0.0;
    double nsr_total = 0.0;
    std::size_t sample_total = 0;
    std::size_t batch_index = 0;
    std::size_t batch_count = 0;

    while (auto batch = iterator_.next()) {
        try {
            const std::uint64_t batch_seed =
                derive_seed(options_.seed, static_cast<std::uint64_t>(epoch_), batch_index);
            ForwardTrace trace = forward(net_, batch->features, /*train_mode=*/true, batch_seed);

            ce_total += cross_entropy(output_logits(net_, trace), batch->labels) *
                        static_cast<double>(batch->labels.size());
            sample_total += batch->labels.size();

            std::map<std::size_t, Matrix2D> extra;
            if (nsr_.lambda > 0.0) {
                for (std::size_t t = 0; t < nsr_.target_layers.size(); ++t) {
                    const std::size_t layer = nsr_.target_layers[t];
                    const Matrix2D& responses = layer_response(net_, trace, layer);
                    const bool exclude = exclusion_active(layer);
                    // Append the batch before estimating means (update order
                    // of the streaming estimator).
                    queues_[t]->push(batch_class_stats(responses, batch->labels,
                                                       priors_.num_classes(), exclude));
                    const MeanEstimate means = queues_[t]->estimate_means();
                    NsrLossResult result =
                        nsr_loss_and_grads(responses, batch->labels, priors_, means,
                                           nsr_.lambda, nsr_.gradient_mode, exclude);
                    nsr_total += result.value;
                    extra.emplace(layer, std::move(result.response_grads));
                }
            }

            Gradients grads =
                backward(net_, trace, batch->labels, extra.empty() ? nullptr : &extra);
            if (options_.penalty && options_.penalty_coef > 0.0) {
                PenaltyResult penalty =
                    parameter_penalty(net_, *options_.penalty, options_.penalty_coef);
                grads.add_scaled(penalty.grads, 1.0);
            }
            optimizer_step(options_.optimizer, net_, grads);
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch_) + " batch " +
                               std::to_string(batch_index) + ": " + e.what());
        }
        ++batch_index;
        ++batch_count;
    }

    ++epoch_;
    last_nsr_loss_ = batch_count > 0 ? nsr_total / static_cast<double>(batch_count) : 0.0;
    return sample_total > 0 ? ce_total / static_cast<double>(sample_total) : 0.0;
}

double Trainer::evaluate_error(const Dataset& data) const { return nsr::evaluate_error(net_, data); }

double Trainer::mean_layer_sigma(const Dataset& data, std::size_t layer) const {
    return mean_sigma(net_, data, priors_, layer, exclusion_active(layer));
}

ResponseTrace Trainer::collect_trace(const Dataset& data, std::size_t layer) const {
    return collect_response_trace(net_, data, layer, exclusion_active(layer));
}

double evaluate_error(const Network& net, const Dataset& data) {
    if (data.size() == 0) throw InvalidArgument("evaluate_error: empty dataset");
    std::size_t wrong = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
        const std::size_t take = std::min(kEvalChunk, data.size() - begin);
        const Matrix2D chunk = dataset_chunk(data, begin, take);
        ForwardTrace trace = forward(net, chunk, /*train_mode=*/false, 0);
        const Matrix2D& logits = output_logits(net, trace);
        for (std::size_t i = 0; i < take; ++i) {
            const double* row = logits.data.data() + i * logits.cols;
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols; ++j) {
                if (row[j] > row[best]) best = j;
            }
            if (best != static_cast<std::size_t>(data.labels[begin + i])) ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

ResponseTrace collect_response_trace(const Network& net, const Dataset& data, std::size_t layer,
                                     bool exclude_zero) {
    if (layer >= net.num_layers()) throw InvalidArgument("collect_response_trace: bad layer");
    ResponseTrace trace;
    trace.layer_index = layer;
    trace.responses = Matrix2D(data.size(), net.layers[layer].output_dim);
    trace.labels = data.labels;
    trace.correct.assign(data.size(), 0);
    trace.exclude_zero = exclude_zero;

    for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
        const std::size_t take = std::min(kEvalChunk, data.size() - begin);
        const Matrix2D chunk = dataset_chunk(data, begin, take);
        ForwardTrace fwd = forward(net, chunk, /*train_mode=*/false, 0);
        const Matrix2D& responses = layer_response(net, fwd, layer);
        std::copy_n(responses.data.data(), responses.size(),
                    trace.responses.data.data() + begin * trace.responses.cols);
        const Matrix2D& logits = output_logits(net, fwd);
        for (std::size_t i = 0; i < take; ++i) {
            const double* row = logits.data.data() + i * logits.cols;
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols; ++j) {
                if (row[j] > row[best]) best = j;
            }
            trace.correct[begin + i] =
                best == static_cast<std::size_t>(data.labels[begin + i]) ? 1 : 0;
        }
    }
    return trace;
}

double mean_sigma(const Network& net, const Dataset& data, const ClassPriors& priors,
                  std::size_t layer, bool exclude_zero) {
    if (layer >= net.num_layers()) throw InvalidArgument("mean_sigma: bad layer");
    ClassResponseStats stats(priors.num_classes(), net.layers[layer].output_dim);
    for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
        const std::size_t take = std::min(kEvalChunk, data.size() - begin);
        const Matrix2D chunk = dataset_chunk(data, begin, take);
        ForwardTrace fwd = forward(net, chunk, /*train_mode=*/false, 0);
        std::vector<int> labels(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                data.labels.begin() + static_cast<std::ptrdiff_t>(begin + take));
        stats.add(layer_response(net, fwd, layer), labels, exclude_zero);
    }
    const std::vector<double> sigma = stats.sigma(priors);
    double total = 0.0;
    for (double s : sigma) total += s;
    return sigma.empty() ? 0.0 : total / static_cast<double>(sigma.size());
}

} // namespace nsr
