#include "matrix.hpp"

#include <cblas.h>
#include <cmath>
#include <string>

extern "C" void openblas_set_num_threads(int);

namespace nsr {

namespace {

// The dense products here are small (batch-sized); OpenBLAS thread fan-out
// costs more than it buys and makes results depend on the ambient thread
// count. Pin to one thread so identical configs reproduce bit-for-bit.
struct BlasSetup {
    BlasSetup() { openblas_set_num_threads(1); }
};
const BlasSetup blas_setup;

void check_inner(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string("matmul: inner dimension mismatch in ") + what + ": " +
                         std::to_string(a) + " vs " + std::to_string(b));
    }
}

} // namespace

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
    check_inner(a.cols, b.rows, "A*B");
    Matrix2D c(a.rows, b.cols);
    if (c.empty()) return c;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans,
                static_cast<int>(a.rows), static_cast<int>(b.cols), static_cast<int>(a.cols),
                1.0, a.data.data(), static_cast<int>(a.cols),
                b.data.data(), static_cast<int>(b.cols),
                0.0, c.data.data(), static_cast<int>(c.cols));
    return c;
}

Matrix2D matmul_nt(const Matrix2D& a, const Matrix2D& b) {
    check_inner(a.cols, b.cols, "A*B^T");
    Matrix2D c(a.rows, b.rows);
    if (c.empty()) return c;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans,
                static_cast<int>(a.rows), static_cast<int>(b.rows), static_cast<int>(a.cols),
                1.0, a.data.data(), static_cast<int>(a.cols),
                b.data.data(), static_cast<int>(b.cols),
                0.0, c.data.data(), static_cast<int>(c.cols));
    return c;
}

Matrix2D matmul_tn(const Matrix2D& a, const Matrix2D& b) {
    check_inner(a.rows, b.rows, "A^T*B");
    Matrix2D c(a.cols, b.cols);
    if (c.empty()) return c;
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans,
                static_cast<int>(a.cols), static_cast<int>(b.cols), static_cast<int>(a.rows),
                1.0, a.data.data(), static_cast<int>(a.cols),
                b.data.data(), static_cast<int>(b.cols),
                0.0, c.data.data(), static_cast<int>(c.cols));
    return c;
}

void add_row_vector(Matrix2D& m, std::span<const double> v) {
    if (v.size() != m.cols) {
        throw ShapeError("add_row_vector: vector length " + std::to_string(v.size()) +
                         " does not match column count " + std::to_string(m.cols));
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) r[j] += v[j];
    }
}

std::vector<double> column_sums(const Matrix2D& m) {
    std::vector<double> s(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) s[j] += r[j];
    }
    return s;
}

bool all_finite(const Matrix2D& m) { return all_finite(std::span<const double>(m.data)); }

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

} // namespace nsr
