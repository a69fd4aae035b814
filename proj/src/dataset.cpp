#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace nsr {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

void Dataset::validate() const {
    if (labels.size() != features.rows) {
        throw ShapeError("dataset: label count does not match feature rows");
    }
    if (num_classes < 1) throw InvalidArgument("dataset: num_classes must be >= 1");
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw InvalidArgument("dataset: label " + std::to_string(y) + " out of range");
        }
    }
    if (!all_finite(features)) throw NumericError("dataset: non-finite feature values");
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw IoError("truncated IDX file: " + path);
    return (static_cast<std::uint32_t>(bytes[0]) << 24) |
           (static_cast<std::uint32_t>(bytes[1]) << 16) |
           (static_cast<std::uint32_t>(bytes[2]) << 8) | static_cast<std::uint32_t>(bytes[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
    unsigned char bytes[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>(v & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open image file: " + images_path);
    const std::uint32_t img_magic = read_u32_be(img, images_path);
    if (img_magic != kImageMagic) {
        throw FormatError("bad image magic " + hex32(img_magic) + " in " + images_path +
                          " (expected " + hex32(kImageMagic) + ")");
    }
    const std::uint32_t num_images = read_u32_be(img, images_path);
    const std::uint32_t rows = read_u32_be(img, images_path);
    const std::uint32_t cols = read_u32_be(img, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open label file: " + labels_path);
    const std::uint32_t lab_magic = read_u32_be(lab, labels_path);
    if (lab_magic != kLabelMagic) {
        throw FormatError("bad label magic " + hex32(lab_magic) + " in " + labels_path +
                          " (expected " + hex32(kLabelMagic) + ")");
    }
    const std::uint32_t num_labels = read_u32_be(lab, labels_path);
    if (num_images != num_labels) {
        throw FormatError("image count " + std::to_string(num_images) +
                          " does not match label count " + std::to_string(num_labels));
    }

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    Dataset ds;
    ds.features = Matrix2D(num_images, dim);
    ds.labels.resize(num_images);

    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < num_images; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
        if (!img) throw IoError("truncated IDX file: " + images_path);
        double* row = ds.features.data.data() + static_cast<std::size_t>(i) * dim;
        for (std::size_t k = 0; k < dim; ++k) row[k] = static_cast<double>(buf[k]) / 255.0;
    }
    std::vector<unsigned char> lbuf(num_labels);
    lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(num_labels));
    if (!lab) throw IoError("truncated IDX file: " + labels_path);
    int max_label = 0;
    for (std::uint32_t i = 0; i < num_labels; ++i) {
        ds.labels[i] = static_cast<int>(lbuf[i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    ds.validate();
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
              std::size_t image_rows, std::size_t image_cols) {
    ds.validate();
    if (image_rows == 0 || image_cols == 0) {
        image_rows = 1;
        image_cols = ds.dim();
    }
    if (image_rows * image_cols != ds.dim()) {
        throw ShapeError("save_idx: image shape does not cover feature dim");
    }
    std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
    if (!img) throw IoError("cannot open for writing: " + images_path);
    write_u32_be(img, kImageMagic);
    write_u32_be(img, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(img, static_cast<std::uint32_t>(image_rows));
    write_u32_be(img, static_cast<std::uint32_t>(image_cols));
    std::vector<unsigned char> buf(ds.dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.features.data.data() + i * ds.dim();
        for (std::size_t k = 0; k < ds.dim(); ++k) {
            const double v = std::clamp(std::round(row[k] * 255.0), 0.0, 255.0);
            buf[k] = static_cast<unsigned char>(v);
        }
        img.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }
    if (!img) throw IoError("write failed: " + images_path);

    std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
    if (!lab) throw IoError("cannot open for writing: " + labels_path);
    write_u32_be(lab, kLabelMagic);
    write_u32_be(lab, static_cast<std::uint32_t>(ds.size()));
    for (int y : ds.labels) {
        const auto b = static_cast<unsigned char>(y);
        lab.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!lab) throw IoError("write failed: " + labels_path);
}

std::pair<Dataset, Dataset> mnist_split(const Dataset& train, std::uint64_t seed) {
    constexpr std::size_t kExpected = 60000;
    constexpr std::size_t kTrain = 50000;
    if (train.size() != kExpected) {
        throw InvalidArgument("mnist_split expects 60000 samples, got " +
                              std::to_string(train.size()));
    }
    std::vector<std::size_t> order(kExpected);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(seed));
    std::shuffle(order.begin(), order.end(), rng);

    auto take = [&](std::size_t begin, std::size_t count, Split split) {
        Dataset out;
        out.features = Matrix2D(count, train.dim());
        out.labels.resize(count);
        out.num_classes = train.num_classes;
        out.split = split;
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t src = order[begin + i];
            std::copy_n(train.features.data.data() + src * train.dim(), train.dim(),
                        out.features.data.data() + i * train.dim());
            out.labels[i] = train.labels[src];
        }
        return out;
    };
    return {take(0, kTrain, Split::Train), take(kTrain, kExpected - kTrain, Split::Val)};
}

Dataset gaussian_blobs(const Matrix2D& centers, int per_class, double stddev,
                       std::uint64_t seed) {
    if (stddev < 0.0) throw InvalidArgument("blob stddev must be >= 0");
    if (per_class < 1) throw InvalidArgument("per_class must be >= 1");
    const std::size_t J = centers.rows;
    if (J < 1) throw InvalidArgument("need at least one center");
    for (std::size_t a = 0; a < J; ++a) {
        for (std::size_t b = a + 1; b < J; ++b) {
            bool same = true;
            for (std::size_t k = 0; k < centers.cols && same; ++k) {
                same = centers(a, k) == centers(b, k);
            }
            if (same) {
                throw InvalidArgument("blob centers " + std::to_string(a) + " and " +
                                      std::to_string(b) + " coincide");
            }
        }
    }

    Dataset ds;
    ds.num_classes = static_cast<int>(J);
    ds.features = Matrix2D(J * static_cast<std::size_t>(per_class), centers.cols);
    ds.labels.resize(ds.features.rows);
    std::mt19937_64 rng(mix_seed(seed));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t row = 0;
    for (std::size_t j = 0; j < J; ++j) {
        for (int s = 0; s < per_class; ++s, ++row) {
            double* out = ds.features.data.data() + row * ds.dim();
            const double* c = centers.data.data() + j * centers.cols;
            for (std::size_t k = 0; k < centers.cols; ++k) {
                out[k] = c[k] + (stddev > 0.0 ? stddev * noise(rng) : 0.0);
            }
            ds.labels[row] = static_cast<int>(j);
        }
    }
    ds.validate();
    return ds;
}

Matrix2D blob_grid_centers(int num_classes, int dim, double spread) {
    if (num_classes < 1 || dim < 1) throw InvalidArgument("bad blob grid shape");
    Matrix2D centers(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(dim));
    // Center j sits at spread * j along axis (j mod dim), offset so the
    // cloud is roughly origin-centered. Pairwise distinct for any J, dim.
    const double shift = spread * 0.5 * static_cast<double>(num_classes - 1);
    for (int j = 0; j < num_classes; ++j) {
        centers(static_cast<std::size_t>(j), static_cast<std::size_t>(j % dim)) =
            spread * static_cast<double>(j) - shift;
    }
    return centers;
}

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed,
                             bool drop_last)
    : dataset_(&dataset), batch_size_(batch_size), seed_(seed), drop_last_(drop_last) {
    if (batch_size_ == 0) throw InvalidArgument("batch size must be >= 1");
    if (batch_size_ > dataset.size()) {
        throw InvalidArgument("batch size " + std::to_string(batch_size_) +
                              " exceeds dataset size " + std::to_string(dataset.size()));
    }
    order_.resize(dataset.size());
    start_epoch(0);
}

void BatchIterator::start_epoch(std::uint64_t epoch) {
    std::iota(order_.begin(), order_.end(), 0);
    std::mt19937_64 rng(mix_seed(seed_ + epoch));
    std::shuffle(order_.begin(), order_.end(), rng);
    cursor_ = 0;
}

std::optional<Batch> BatchIterator::next() {
    const std::size_t remaining = order_.size() - cursor_;
    if (remaining == 0) return std::nullopt;
    if (remaining < batch_size_ && drop_last_) return std::nullopt;
    const std::size_t take = std::min(batch_size_, remaining);

    Batch batch;
    batch.features = Matrix2D(take, dataset_->dim());
    batch.labels.resize(take);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t src = order_[cursor_ + i];
        std::copy_n(dataset_->features.data.data() + src * dataset_->dim(), dataset_->dim(),
                    batch.features.data.data() + i * dataset_->dim());
        batch.labels[i] = dataset_->labels[src];
    }
    cursor_ += take;
    return batch;
}

std::size_t BatchIterator::batches_per_epoch() const {
    if (drop_last_) return order_.size() / batch_size_;
    return (order_.size() + batch_size_ - 1) / batch_size_;
}

} // namespace nsr
