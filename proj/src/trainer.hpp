#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "analytics.hpp"
#include "dataset.hpp"
#include "loss.hpp"
#include "network.hpp"
#include "optimizer.hpp"
#include "steadiness.hpp"

namespace nsr {

/// Composite-loss mini-batch training: cross-entropy plus the steadiness
/// term on the configured target layers plus an optional L1/L2 parameter
/// penalty. Owns the network, optimizer state and one memory queue per
/// target layer. Single-writer: one trainer mutates a network at a time.
class Trainer {
public:
    struct Options {
        OptimizerState optimizer = OptimizerState::sgd(0.1);
        NsrConfig nsr;                            // target_layers empty = off
        std::optional<PenaltyKind> penalty;
        double penalty_coef = 0.0;
        std::size_t batch_size = 100;
        std::uint64_t seed = 1;
    };

    Trainer(Network initial_net, Options options, const Dataset& train_data);

    /// One full pass over the training data; returns the mean cross-entropy
    /// over the epoch's batches.
    double run_epoch();

    int epochs_run() const { return epoch_; }
    const Network& net() const { return net_; }
    Network take_net() { return std::move(net_); }
    const ClassPriors& priors() const { return priors_; }
    const std::vector<std::size_t>& target_layers() const { return nsr_.target_layers; }

    /// Steadiness loss value accumulated over the last epoch (mean over
    /// batches), for diagnostics.
    double last_epoch_nsr_loss() const { return last_nsr_loss_; }

    /// Whether zero responses are excluded on the given layer under the
    /// current configuration.
    bool exclusion_active(std::size_t layer) const;

    /// Queue memory accounting over all target layers.
    std::size_t queue_bytes() const;

    /// Classification error of the current network on a dataset (eval mode,
    /// chunked sweep).
    double evaluate_error(const Dataset& data) const;

    /// Mean over the layer's neurons of sigma_n on a dataset (eval mode),
    /// with exclusion per the trainer's configuration for that layer.
    double mean_layer_sigma(const Dataset& data, std::size_t layer) const;

    /// Layer responses over a dataset in eval mode (materialized trace for
    /// the analytics); responses of SoftmaxOutput layers are the logits.
    ResponseTrace collect_trace(const Dataset& data, std::size_t layer) const;

private:
    Network net_;
    Options options_;
    const Dataset* train_;
    ClassPriors priors_;
    NsrConfig nsr_;
    BatchIterator iterator_;
    std::vector<std::unique_ptr<ClassQueues>> queues_; // parallel to nsr_.target_layers
    int epoch_ = 0;
    double last_nsr_loss_ = 0.0;
};

/// Eval-mode helpers shared with the analytics pipeline.
double evaluate_error(const Network& net, const Dataset& data);
ResponseTrace collect_response_trace(const Network& net, const Dataset& data, std::size_t layer,
                                     bool exclude_zero);
double mean_sigma(const Network& net, const Dataset& data, const ClassPriors& priors,
                  std::size_t layer, bool exclude_zero);

} // namespace nsr
