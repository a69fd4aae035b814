#include "network.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "loss.hpp"

namespace nsr {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
        case Activation::SoftmaxOutput: return "softmax_output";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "identity") return Activation::Identity;
    if (name == "softmax_output") return Activation::SoftmaxOutput;
    throw InvalidArgument("unknown activation: " + name);
}

Network Network::make(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    Network net;
    net.layers = specs;
    std::mt19937_64 rng(mix_seed(seed));
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const LayerSpec& s = specs[l];
        if (s.input_dim < 1 || s.output_dim < 1) {
            throw ShapeError("layer " + std::to_string(l) + ": dims must be >= 1");
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(s.input_dim));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Matrix2D w(s.output_dim, s.input_dim);
        for (double& x : w.data) x = dist(rng);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(s.output_dim, 0.0);
    }
    net.validate();
    return net;
}

Network Network::make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                          std::size_t num_classes, std::uint64_t seed, double hidden_dropout) {
    std::vector<LayerSpec> specs;
    std::size_t in = input_dim;
    for (std::size_t h : hidden_dims) {
        specs.push_back({in, h, Activation::Relu, hidden_dropout});
        in = h;
    }
    specs.push_back({in, num_classes, Activation::Identity, 0.0});
    return make(specs, seed);
}

void Network::validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    if (weights.size() != layers.size() || biases.size() != layers.size()) {
        throw ShapeError("parameter count does not match layer count");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerSpec& s = layers[l];
        if (s.dropout_rate < 0.0 || s.dropout_rate >= 1.0) {
            throw InvalidArgument("layer " + std::to_string(l) + ": dropout_rate must be in [0,1)");
        }
        if (s.activation == Activation::SoftmaxOutput && l + 1 != layers.size()) {
            throw InvalidArgument("softmax_output is only permitted on the final layer");
        }
        if (l > 0 && layers[l - 1].output_dim != s.input_dim) {
            throw ShapeError("layer " + std::to_string(l) + ": input_dim " +
                             std::to_string(s.input_dim) + " does not chain from previous output " +
                             std::to_string(layers[l - 1].output_dim));
        }
        if (weights[l].rows != s.output_dim || weights[l].cols != s.input_dim) {
            throw ShapeError("layer " + std::to_string(l) + ": weight shape mismatch");
        }
        if (biases[l].size() != s.output_dim) {
            throw ShapeError("layer " + std::to_string(l) + ": bias length mismatch");
        }
    }
}

namespace {

constexpr std::uint8_t kModelFormatVersion = 0x01;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated model file: " + path);
    return v;
}

} // namespace

void Network::save(const std::string& path) const {
    validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_raw(out, kModelFormatVersion);
    write_raw(out, static_cast<std::uint32_t>(layers.size()));
    for (const LayerSpec& s : layers) {
        write_raw(out, static_cast<std::uint32_t>(s.input_dim));
        write_raw(out, static_cast<std::uint32_t>(s.output_dim));
        write_raw(out, static_cast<std::uint8_t>(s.activation));
        write_raw(out, s.dropout_rate);
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        out.write(reinterpret_cast<const char*>(weights[l].data.data()),
                  static_cast<std::streamsize>(weights[l].size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(biases[l].data()),
                  static_cast<std::streamsize>(biases[l].size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed: " + path);
}

Network Network::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    const auto version = read_raw<std::uint8_t>(in, path);
    if (version != kModelFormatVersion) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "0x%02x", version);
        throw FormatError("unsupported model format version " + std::string(buf) + " in " + path);
    }
    const auto num_layers = read_raw<std::uint32_t>(in, path);
    Network net;
    for (std::uint32_t l = 0; l < num_layers; ++l) {
        LayerSpec s;
        s.input_dim = read_raw<std::uint32_t>(in, path);
        s.output_dim = read_raw<std::uint32_t>(in, path);
        const auto act = read_raw<std::uint8_t>(in, path);
        if (act > 2) throw FormatError("bad activation code in " + path);
        s.activation = static_cast<Activation>(act);
        s.dropout_rate = read_raw<double>(in, path);
        net.layers.push_back(s);
    }
    for (std::uint32_t l = 0; l < num_layers; ++l) {
        const LayerSpec& s = net.layers[l];
        Matrix2D w(s.output_dim, s.input_dim);
        in.read(reinterpret_cast<char*>(w.data.data()),
                static_cast<std::streamsize>(w.size() * sizeof(double)));
        std::vector<double> b(s.output_dim);
        in.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(b.size() * sizeof(double)));
        if (!in) throw IoError("truncated model file: " + path);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    net.validate();
    return net;
}

ForwardTrace forward(const Network& net, const Matrix2D& features, bool train_mode,
                     std::uint64_t rng_seed) {
    net.validate();
    if (features.cols != net.input_dim()) {
        throw ShapeError("forward: feature dim " + std::to_string(features.cols) +
                         " does not match network input dim " + std::to_string(net.input_dim()));
    }
    ForwardTrace trace;
    trace.train_mode = train_mode;
    trace.input = features;
    trace.pre_activations.reserve(net.num_layers());
    trace.post_activations.reserve(net.num_layers());
    trace.dropout_scale.resize(net.num_layers());

    const Matrix2D* x = &trace.input;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const LayerSpec& spec = net.layers[l];
        Matrix2D pre = matmul_nt(*x, net.weights[l]);
        add_row_vector(pre, net.biases[l]);

        Matrix2D post;
        switch (spec.activation) {
            case Activation::Relu:
                post = pre;
                for (double& v : post.data) v = v > 0.0 ? v : 0.0;
                break;
            case Activation::Identity:
                post = pre;
                break;
            case Activation::SoftmaxOutput:
                post = softmax_rows(pre);
                break;
        }

        if (train_mode && spec.dropout_rate > 0.0) {
            // Inverted dropout: scale kept units by 1/(1-rate) so eval mode
            // needs no rescaling.
            std::mt19937_64 rng(derive_seed(rng_seed, l));
            std::bernoulli_distribution keep(1.0 - spec.dropout_rate);
            const double scale = 1.0 / (1.0 - spec.dropout_rate);
            Matrix2D mask(post.rows, post.cols);
            for (std::size_t i = 0; i < mask.size(); ++i) {
                mask.data[i] = keep(rng) ? scale : 0.0;
                post.data[i] *= mask.data[i];
            }
            trace.dropout_scale[l] = std::move(mask);
        }

        trace.pre_activations.push_back(std::move(pre));
        trace.post_activations.push_back(std::move(post));
        x = &trace.post_activations.back();
    }
    return trace;
}

const Matrix2D& layer_response(const Network& net, const ForwardTrace& trace, std::size_t layer) {
    if (layer >= net.num_layers()) {
        throw InvalidArgument("layer index " + std::to_string(layer) + " out of range");
    }
    if (net.layers[layer].activation == Activation::SoftmaxOutput) {
        return trace.pre_activations[layer];
    }
    return trace.post_activations[layer];
}

const Matrix2D& output_logits(const Network& net, const ForwardTrace& trace) {
    return layer_response(net, trace, net.num_layers() - 1);
}

Gradients Gradients::zeros_like(const Network& net) {
    Gradients g;
    g.weights.reserve(net.num_layers());
    g.biases.reserve(net.num_layers());
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        g.weights.emplace_back(net.weights[l].rows, net.weights[l].cols);
        g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

void Gradients::add_scaled(const Gradients& other, double factor) {
    if (other.weights.size() != weights.size()) throw ShapeError("gradient layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (other.weights[l].size() != weights[l].size() ||
            other.biases[l].size() != biases[l].size()) {
            throw ShapeError("gradient shape mismatch at layer " + std::to_string(l));
        }
        for (std::size_t i = 0; i < weights[l].size(); ++i) {
            weights[l].data[i] += factor * other.weights[l].data[i];
        }
        for (std::size_t i = 0; i < biases[l].size(); ++i) {
            biases[l][i] += factor * other.biases[l][i];
        }
    }
}

Gradients backward(const Network& net, const ForwardTrace& trace, const std::vector<int>& labels,
                   const std::map<std::size_t, Matrix2D>* extra_response_grads) {
    const std::size_t num_layers = net.num_layers();
    if (trace.pre_activations.size() != num_layers) {
        throw ShapeError("backward: trace does not match network");
    }
    if (extra_response_grads) {
        for (const auto& [layer, grad] : *extra_response_grads) {
            if (layer >= num_layers) {
                throw ShapeError("backward: injected gradient for nonexistent layer " +
                                 std::to_string(layer));
            }
            const Matrix2D& resp = layer_response(net, trace, layer);
            if (grad.rows != resp.rows || grad.cols != resp.cols) {
                throw ShapeError("backward: injected gradient shape mismatch at layer " +
                                 std::to_string(layer));
            }
        }
    }

    Gradients grads = Gradients::zeros_like(net);

    // Gradient w.r.t. the current layer's response (post-activations, or
    // pre-softmax logits for a SoftmaxOutput layer).
    Matrix2D response_grad = cross_entropy_grad(output_logits(net, trace), labels);
    if (extra_response_grads) {
        auto it = extra_response_grads->find(num_layers - 1);
        if (it != extra_response_grads->end()) {
            for (std::size_t i = 0; i < response_grad.size(); ++i) {
                response_grad.data[i] += it->second.data[i];
            }
        }
    }

    for (std::size_t l = num_layers; l-- > 0;) {
        const LayerSpec& spec = net.layers[l];
        Matrix2D pre_grad;
        if (spec.activation == Activation::SoftmaxOutput) {
            // Response is the pre-activation itself.
            pre_grad = std::move(response_grad);
        } else {
            // Chain through dropout scaling, then the activation.
            pre_grad = std::move(response_grad);
            if (!trace.dropout_scale[l].empty()) {
                for (std::size_t i = 0; i < pre_grad.size(); ++i) {
                    pre_grad.data[i] *= trace.dropout_scale[l].data[i];
                }
            }
            if (spec.activation == Activation::Relu) {
                const Matrix2D& pre = trace.pre_activations[l];
                for (std::size_t i = 0; i < pre_grad.size(); ++i) {
                    if (pre.data[i] <= 0.0) pre_grad.data[i] = 0.0;
                }
            }
        }

        const Matrix2D& below = (l == 0) ? trace.input : trace.post_activations[l - 1];
        grads.weights[l] = matmul_tn(pre_grad, below);
        grads.biases[l] = column_sums(pre_grad);

        if (l > 0) {
            response_grad = matmul(pre_grad, net.weights[l]);
            if (extra_response_grads) {
                auto it = extra_response_grads->find(l - 1);
                if (it != extra_response_grads->end()) {
                    for (std::size_t i = 0; i < response_grad.size(); ++i) {
                        response_grad.data[i] += it->second.data[i];
                    }
                }
            }
        }
    }
    return grads;
}

} // namespace nsr
