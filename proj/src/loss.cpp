#include "loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nsr {

namespace {

void check_labels(const Matrix2D& logits, const std::vector<int>& labels) {
    if (labels.size() != logits.rows) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows) + " rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols) {
            throw InvalidArgument("cross_entropy: label " + std::to_string(labels[i]) +
                                  " out of range [0, " + std::to_string(logits.cols) +
                                  ") at row " + std::to_string(i));
        }
    }
}

} // namespace

Matrix2D softmax_rows(const Matrix2D& logits) {
    Matrix2D out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* in = logits.data.data() + i * logits.cols;
        double* o = out.data.data() + i * out.cols;
        double mx = in[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) o[j] /= sum;
    }
    return out;
}

double cross_entropy(const Matrix2D& logits, const std::vector<int>& labels) {
    check_labels(logits, labels);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* in = logits.data.data() + i * logits.cols;
        double mx = in[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp(in[j] - mx);
        // -log softmax[label] = log(sum exp(x - mx)) - (x_label - mx)
        total += std::log(sum) - (in[labels[i]] - mx);
    }
    return total / static_cast<double>(logits.rows);
}

Matrix2D cross_entropy_grad(const Matrix2D& logits, const std::vector<int>& labels) {
    check_labels(logits, labels);
    Matrix2D grad = softmax_rows(logits);
    const double inv_b = 1.0 / static_cast<double>(logits.rows);
    for (std::size_t i = 0; i < grad.rows; ++i) {
        double* g = grad.data.data() + i * grad.cols;
        g[static_cast<std::size_t>(labels[i])] -= 1.0;
        for (std::size_t j = 0; j < grad.cols; ++j) g[j] *= inv_b;
    }
    return grad;
}

double error_rate(const Matrix2D& logits, const std::vector<int>& labels) {
    check_labels(logits, labels);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* in = logits.data.data() + i * logits.cols;
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols; ++j) {
            if (in[j] > in[best]) best = j;
        }
        if (best != static_cast<std::size_t>(labels[i])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(logits.rows);
}

} // namespace nsr
