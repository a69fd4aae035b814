#include "complexity.hpp"

#include <algorithm>
#include <cmath>

#include "csv.hpp"

namespace nsr {

namespace {

double pnorm(std::span<const double> v, double p) {
    double acc = 0.0;
    for (double x : v) acc += std::pow(std::abs(x), p);
    return std::pow(acc, 1.0 / p);
}

void check_p(double p) {
    if (!(p >= 1.0)) throw InvalidArgument("norm order p must be >= 1");
}

} // namespace

double scatter(const Matrix2D& representations, double p) {
    check_p(p);
    if (representations.rows == 0) throw InvalidArgument("scatter: empty class");
    const std::size_t n = representations.rows;
    const std::size_t d = representations.cols;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = representations.data.data() + i * d;
        for (std::size_t k = 0; k < d; ++k) centroid[k] += row[k];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    double acc = 0.0;
    std::vector<double> dev(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = representations.data.data() + i * d;
        for (std::size_t k = 0; k < d; ++k) dev[k] = row[k] - centroid[k];
        acc += std::pow(pnorm(dev, p), p);
    }
    return std::pow(acc / static_cast<double>(n), 1.0 / p);
}

double separation(std::span<const double> centroid_a, std::span<const double> centroid_b,
                  double p) {
    check_p(p);
    if (centroid_a.size() != centroid_b.size()) {
        throw ShapeError("separation: centroid dimensionality mismatch");
    }
    std::vector<double> diff(centroid_a.size());
    for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = centroid_a[k] - centroid_b[k];
    return pnorm(diff, p);
}

ComplexityReport complexity_measure(const Matrix2D& representations,
                                    const std::vector<int>& labels, double p) {
    check_p(p);
    if (labels.size() != representations.rows) {
        throw ShapeError("complexity_measure: label count does not match rows");
    }
    if (representations.rows == 0) throw InvalidArgument("complexity_measure: no samples");
    int max_label = 0;
    for (int y : labels) {
        if (y < 0) throw InvalidArgument("complexity_measure: negative label");
        max_label = std::max(max_label, y);
    }
    const std::size_t J = static_cast<std::size_t>(max_label) + 1;
    if (J < 2) throw InvalidArgument("complexity_measure needs at least 2 classes");
    const std::size_t d = representations.cols;

    ComplexityReport report;
    report.p = p;
    report.class_sizes.assign(J, 0);
    report.centroids = Matrix2D(J, d);
    for (std::size_t i = 0; i < representations.rows; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        ++report.class_sizes[y];
        const double* row = representations.data.data() + i * d;
        double* c = report.centroids.data.data() + y * d;
        for (std::size_t k = 0; k < d; ++k) c[k] += row[k];
    }
    for (std::size_t j = 0; j < J; ++j) {
        if (report.class_sizes[j] == 0) {
            throw InvalidArgument("complexity_measure: class " + std::to_string(j) +
                                  " has no samples");
        }
        double* c = report.centroids.data.data() + j * d;
        for (std::size_t k = 0; k < d; ++k) c[k] /= static_cast<double>(report.class_sizes[j]);
    }

    // Scatter: mean p-th power of deviation norms, then the 1/p root.
    report.scatter.assign(J, 0.0);
    std::vector<double> dev(d);
    for (std::size_t i = 0; i < representations.rows; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const double* row = representations.data.data() + i * d;
        const double* c = report.centroids.data.data() + y * d;
        for (std::size_t k = 0; k < d; ++k) dev[k] = row[k] - c[k];
        report.scatter[y] += std::pow(pnorm(dev, p), p);
    }
    for (std::size_t j = 0; j < J; ++j) {
        report.scatter[j] =
            std::pow(report.scatter[j] / static_cast<double>(report.class_sizes[j]), 1.0 / p);
    }

    report.separation = Matrix2D(J, J);
    for (std::size_t i = 0; i < J; ++i) {
        for (std::size_t j = i + 1; j < J; ++j) {
            const double m = separation(report.centroids.row(i), report.centroids.row(j), p);
            if (m == 0.0) {
                throw NumericError("complexity_measure: classes " + std::to_string(i) + " and " +
                                   std::to_string(j) + " have coincident centroids");
            }
            report.separation(i, j) = m;
            report.separation(j, i) = m;
        }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < J; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            if (j == i) continue;
            worst = std::max(worst,
                             (report.scatter[i] + report.scatter[j]) / report.separation(i, j));
        }
        total += worst;
    }
    report.value = total / static_cast<double>(J);
    return report;
}

void write_complexity_csv(const ComplexityReport& report, const std::string& path) {
    CsvWriter csv(path, "kind,class_i,class_j,value,p");
    const std::size_t J = report.scatter.size();
    for (std::size_t i = 0; i < J; ++i) {
        csv.row("S", std::to_string(i), "", csv_double(report.scatter[i]), "");
    }
    for (std::size_t i = 0; i < J; ++i) {
        for (std::size_t j = i + 1; j < J; ++j) {
            csv.row("M", std::to_string(i), std::to_string(j), csv_double(report.separation(i, j)),
                    "");
        }
    }
    csv.row("C", "", "", csv_double(report.value), csv_double(report.p));
    csv.close();
}

} // namespace nsr
