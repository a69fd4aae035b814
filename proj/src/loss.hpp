#pragma once

#include <vector>

#include "matrix.hpp"

namespace nsr {

/// Row-wise softmax with max-subtraction stabilization.
Matrix2D softmax_rows(const Matrix2D& logits);

/// Mean over the batch of -log softmax(logits)[label].
/// Throws InvalidArgument when a label is outside [0, cols).
double cross_entropy(const Matrix2D& logits, const std::vector<int>& labels);

/// d(mean cross-entropy)/d(logits) = (softmax(logits) - onehot) / B.
Matrix2D cross_entropy_grad(const Matrix2D& logits, const std::vector<int>& labels);

/// Fraction of rows whose argmax logit disagrees with the label.
double error_rate(const Matrix2D& logits, const std::vector<int>& labels);

} // namespace nsr
