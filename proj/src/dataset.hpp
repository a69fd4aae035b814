#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "matrix.hpp"
#include "network.hpp"

namespace nsr {

enum class Split { Train, Val, Test };

const char* split_name(Split s);

struct Dataset {
    Matrix2D features; // samples x D
    std::vector<int> labels;
    int num_classes = 0;
    Split split = Split::Train;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    void validate() const;
};

/// Loads a big-endian IDX image/label file pair. Image magic must be
/// 0x00000803 (u8 pixels, 3 dims), label magic 0x00000801; pixel bytes are
/// scaled by 1/255. Image and label counts must agree.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes the dataset back to the IDX pair; features are quantized to u8
/// via round(value * 255) clamped to [0, 255].
void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
              std::size_t image_rows = 0, std::size_t image_cols = 0);

/// Seeded shuffle of a 60000-sample training set into (50000 train,
/// 10000 validation).
std::pair<Dataset, Dataset> mnist_split(const Dataset& train, std::uint64_t seed);

/// Isotropic Gaussian blobs around the given centers (J x dim), per_class
/// samples each, labels 0..J-1 in center order.
Dataset gaussian_blobs(const Matrix2D& centers, int per_class, double stddev, std::uint64_t seed);

/// Two-block centers at +/- spread/2 on every coordinate axis chunk; a
/// simple deterministic layout for J well-separated classes.
Matrix2D blob_grid_centers(int num_classes, int dim, double spread);

/// Streams seeded mini-batches over a dataset. Each epoch reshuffles with
/// seed + epoch; every index appears exactly once per epoch. The final
/// partial batch is emitted unless drop_last is set.
class BatchIterator {
public:
    BatchIterator(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed,
                  bool drop_last = false);

    void start_epoch(std::uint64_t epoch);
    std::optional<Batch> next();

    std::size_t batches_per_epoch() const;
    std::size_t batch_size() const { return batch_size_; }

private:
    const Dataset* dataset_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    bool drop_last_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

} // namespace nsr
