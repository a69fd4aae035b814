#pragma once

#include "network.hpp"

namespace nsr {

enum class OptimizerKind { Sgd, Momentum };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Sgd;
    double learning_rate = 0.1;
    double momentum_coef = 0.0; // in [0,1)
    Gradients velocity;         // allocated on first step

    static OptimizerState sgd(double learning_rate);
    static OptimizerState momentum(double learning_rate, double momentum_coef);
};

/// sgd:      theta <- theta - lr * g
/// momentum: v <- mu * v + g; theta <- theta - lr * v
/// Throws NumericError naming the layer when a gradient entry is not finite.
void optimizer_step(OptimizerState& state, Network& net, const Gradients& grads);

/// L1/L2 parameter penalties (weights and biases).
enum class PenaltyKind { L1, L2 };

struct PenaltyResult {
    double value = 0.0;
    Gradients grads;
};

/// l2: coef * sum(theta^2), gradient 2*coef*theta.
/// l1: coef * sum(|theta|), subgradient coef * sign(theta), sign(0) = 0.
PenaltyResult parameter_penalty(const Network& net, PenaltyKind kind, double coef);

} // namespace nsr
