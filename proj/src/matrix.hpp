#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "common.hpp"

namespace nsr {

/// Dense row-major matrix of doubles. Rows index samples (the batch
/// dimension B) and columns index features/neurons throughout the library.
struct Matrix2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major, rows*cols entries

    Matrix2D() = default;
    Matrix2D(std::size_t r, std::size_t c, double value = 0.0)
        : rows(r), cols(c), data(r * c, value) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

/// C = A * B.  Throws ShapeError on inner-dimension mismatch.
Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);

/// C = A * B^T  (A is m-by-k, B is n-by-k, C is m-by-n).
Matrix2D matmul_nt(const Matrix2D& a, const Matrix2D& b);

/// C = A^T * B  (A is k-by-m, B is k-by-n, C is m-by-n).
Matrix2D matmul_tn(const Matrix2D& a, const Matrix2D& b);

/// Adds the vector v to every row of m in place.
void add_row_vector(Matrix2D& m, std::span<const double> v);

/// Per-column sums (length cols).
std::vector<double> column_sums(const Matrix2D& m);

bool all_finite(const Matrix2D& m);
bool all_finite(std::span<const double> v);

} // namespace nsr
