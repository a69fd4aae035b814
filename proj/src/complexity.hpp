#pragma once

#include <span>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace nsr {

/// Davies-Bouldin-style consistency-of-representations measure.
///
/// S_i  = ( mean over class-i samples of ||o - mu_i||_p^p )^(1/p)
/// M_ij = || mu_i - mu_j ||_p
/// C    = (1/J) * sum_i max_{j != i} (S_i + S_j) / M_ij
struct ComplexityReport {
    double p = 2.0;
    Matrix2D centroids;              // J x D
    std::vector<double> scatter;     // S_i per class
    Matrix2D separation;             // J x J, symmetric, zero diagonal
    std::vector<std::int64_t> class_sizes;
    double value = 0.0;              // C
};

/// Within-class scatter S_i of one class's representations (rows).
double scatter(const Matrix2D& representations, double p);

/// Between-centroid separation M_ij.
double separation(std::span<const double> centroid_a, std::span<const double> centroid_b,
                  double p);

/// Full measure over labeled representations. Requires >= 2 non-empty
/// classes with pairwise distinct centroids; throws NumericError naming the
/// offending pair when two centroids coincide.
ComplexityReport complexity_measure(const Matrix2D& representations,
                                    const std::vector<int>& labels, double p = 2.0);

void write_complexity_csv(const ComplexityReport& report, const std::string& path);

} // namespace nsr
