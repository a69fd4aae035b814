#include "optimizer.hpp"

#include <cmath>
#include <string>

namespace nsr {

OptimizerState OptimizerState::sgd(double learning_rate) {
    if (learning_rate <= 0.0) throw InvalidArgument("learning_rate must be > 0");
    OptimizerState s;
    s.kind = OptimizerKind::Sgd;
    s.learning_rate = learning_rate;
    return s;
}

OptimizerState OptimizerState::momentum(double learning_rate, double momentum_coef) {
    if (learning_rate <= 0.0) throw InvalidArgument("learning_rate must be > 0");
    if (momentum_coef < 0.0 || momentum_coef >= 1.0) {
        throw InvalidArgument("momentum_coef must be in [0,1)");
    }
    OptimizerState s;
    s.kind = OptimizerKind::Momentum;
    s.learning_rate = learning_rate;
    s.momentum_coef = momentum_coef;
    return s;
}

void optimizer_step(OptimizerState& state, Network& net, const Gradients& grads) {
    if (grads.weights.size() != net.num_layers()) {
        throw ShapeError("optimizer_step: gradient layer count mismatch");
    }
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        if (grads.weights[l].rows != net.weights[l].rows ||
            grads.weights[l].cols != net.weights[l].cols ||
            grads.biases[l].size() != net.biases[l].size()) {
            throw ShapeError("optimizer_step: gradient shape mismatch at layer " +
                             std::to_string(l));
        }
        if (!all_finite(grads.weights[l]) || !all_finite(std::span<const double>(grads.biases[l]))) {
            throw NumericError("optimizer_step: non-finite gradient at layer " +
                               std::to_string(l));
        }
    }

    const double lr = state.learning_rate;
    if (state.kind == OptimizerKind::Sgd) {
        for (std::size_t l = 0; l < net.num_layers(); ++l) {
            for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
                net.weights[l].data[i] -= lr * grads.weights[l].data[i];
            }
            for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
                net.biases[l][i] -= lr * grads.biases[l][i];
            }
        }
        return;
    }

    if (state.velocity.weights.empty()) state.velocity = Gradients::zeros_like(net);
    const double mu = state.momentum_coef;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        Matrix2D& vw = state.velocity.weights[l];
        for (std::size_t i = 0; i < vw.size(); ++i) {
            vw.data[i] = mu * vw.data[i] + grads.weights[l].data[i];
            net.weights[l].data[i] -= lr * vw.data[i];
        }
        std::vector<double>& vb = state.velocity.biases[l];
        for (std::size_t i = 0; i < vb.size(); ++i) {
            vb[i] = mu * vb[i] + grads.biases[l][i];
            net.biases[l][i] -= lr * vb[i];
        }
    }
}

PenaltyResult parameter_penalty(const Network& net, PenaltyKind kind, double coef) {
    if (coef < 0.0) throw InvalidArgument("penalty coefficient must be >= 0");
    PenaltyResult result;
    result.grads = Gradients::zeros_like(net);
    if (coef == 0.0) return result;

    auto accumulate = [&](double theta, double& grad_out) {
        if (kind == PenaltyKind::L2) {
            result.value += coef * theta * theta;
            grad_out = 2.0 * coef * theta;
        } else {
            result.value += coef * std::abs(theta);
            grad_out = theta > 0.0 ? coef : (theta < 0.0 ? -coef : 0.0);
        }
    };

    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
            accumulate(net.weights[l].data[i], result.grads.weights[l].data[i]);
        }
        for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
            accumulate(net.biases[l][i], result.grads.biases[l][i]);
        }
    }
    return result;
}

} // namespace nsr
