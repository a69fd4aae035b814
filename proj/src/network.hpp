#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace nsr {

enum class Activation : std::uint8_t {
    Relu = 0,
    Identity = 1,
    SoftmaxOutput = 2, // row-wise softmax; only valid on the final layer
};

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::Relu;
    double dropout_rate = 0.0; // in [0,1), applied to the layer output in train mode
};

struct Batch {
    Matrix2D features; // B x D
    std::vector<int> labels;
};

/// Dense feedforward network. weights[l] is output_dim x input_dim,
/// biases[l] has output_dim entries.
struct Network {
    std::vector<LayerSpec> layers;
    std::vector<Matrix2D> weights;
    std::vector<std::vector<double>> biases;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().input_dim; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().output_dim; }

    /// Builds a network from explicit layer specs with Kaiming-style uniform
    /// init (U[-sqrt(6/fan_in), +sqrt(6/fan_in)]) for weights, zero biases.
    static Network make(const std::vector<LayerSpec>& specs, std::uint64_t seed);

    /// Convenience builder: input -> hidden dims (relu) -> output (identity).
    static Network make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                            std::size_t num_classes, std::uint64_t seed,
                            double hidden_dropout = 0.0);

    void validate() const; // throws ShapeError on inconsistent shapes

    void save(const std::string& path) const;
    static Network load(const std::string& path);
};

/// Per-layer records of one forward pass. post_activations hold what the
/// next layer consumes (activation output, dropout already applied in
/// train mode). dropout_scale[l] is empty when no dropout was applied,
/// otherwise it holds the per-entry factor (0 or 1/(1-rate)).
struct ForwardTrace {
    Matrix2D input;
    std::vector<Matrix2D> pre_activations;
    std::vector<Matrix2D> post_activations;
    std::vector<Matrix2D> dropout_scale;
    bool train_mode = false;
};

ForwardTrace forward(const Network& net, const Matrix2D& features, bool train_mode,
                     std::uint64_t rng_seed);

/// The layer output used as "neuron response" by the regularizer and the
/// analytics: post-activations, except for a SoftmaxOutput layer where the
/// response is the pre-softmax logits.
const Matrix2D& layer_response(const Network& net, const ForwardTrace& trace, std::size_t layer);

/// Logits used by the cross-entropy loss: the final layer's response.
const Matrix2D& output_logits(const Network& net, const ForwardTrace& trace);

struct Gradients {
    std::vector<Matrix2D> weights;
    std::vector<std::vector<double>> biases;

    static Gradients zeros_like(const Network& net);
    void add_scaled(const Gradients& other, double factor);
};

/// Backpropagation of the composite loss through the network.
///
/// The base loss is mean cross-entropy of the output logits against
/// `labels`. `extra_response_grads` maps a layer index to d(extra loss)/
/// d(response of that layer); the returned parameter gradients are exact
/// for cross-entropy plus the injected terms.
Gradients backward(const Network& net, const ForwardTrace& trace, const std::vector<int>& labels,
                   const std::map<std::size_t, Matrix2D>* extra_response_grads = nullptr);

} // namespace nsr
