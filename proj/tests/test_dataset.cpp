#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "complexity.hpp"
#include "dataset.hpp"
#include "loss.hpp"
#include "optimizer.hpp"
#include "test_util.hpp"

using nsr::Dataset;
using nsr::Matrix2D;

namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const char* name) { return fs::temp_directory_path() / name; }

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

// Big-endian u32 helper for hand-built IDX fixtures.
void push_u32(std::vector<unsigned char>& bytes, std::uint32_t v) {
    bytes.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
    bytes.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    bytes.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    bytes.push_back(static_cast<unsigned char>(v & 0xff));
}

} // namespace

TEST_CASE("load_idx: hand-crafted byte fixture round with labels [0,1,2]") {
    // 3 images of 2x2 and labels [0,1,2].
    std::vector<unsigned char> images;
    push_u32(images, 0x00000803);
    push_u32(images, 3);
    push_u32(images, 2);
    push_u32(images, 2);
    const std::vector<unsigned char> pixels{0,   255, 0,   255, //
                                            128, 0,   64,  32,  //
                                            255, 255, 255, 255};
    images.insert(images.end(), pixels.begin(), pixels.end());
    std::vector<unsigned char> labels;
    push_u32(labels, 0x00000801);
    push_u32(labels, 3);
    labels.insert(labels.end(), {0, 1, 2});

    const auto img_path = tmp_file("nsr_idx_images");
    const auto lab_path = tmp_file("nsr_idx_labels");
    write_bytes(img_path, images);
    write_bytes(lab_path, labels);

    const Dataset ds = nsr::load_idx(img_path.string(), lab_path.string());
    CHECK(ds.size() == 3);
    CHECK(ds.dim() == 4);
    CHECK(ds.labels == std::vector<int>{0, 1, 2});
    // 1/255 scaling: bytes [0,255,0,255] -> [0,1,0,1]
    CHECK(ds.features(0, 0) == doctest::Approx(0.0));
    CHECK(ds.features(0, 1) == doctest::Approx(1.0));
    CHECK(ds.features(0, 2) == doctest::Approx(0.0));
    CHECK(ds.features(0, 3) == doctest::Approx(1.0));
    CHECK(ds.features(1, 0) == doctest::Approx(128.0 / 255.0));

    fs::remove(img_path);
    fs::remove(lab_path);
}

TEST_CASE("load_idx: wrong magic in the image file is a format error naming the file") {
    std::vector<unsigned char> images;
    push_u32(images, 0x00000801); // label magic where image magic belongs
    push_u32(images, 1);
    push_u32(images, 1);
    push_u32(images, 1);
    images.push_back(7);
    std::vector<unsigned char> labels;
    push_u32(labels, 0x00000801);
    push_u32(labels, 1);
    labels.push_back(0);

    const auto img_path = tmp_file("nsr_idx_badmagic_img");
    const auto lab_path = tmp_file("nsr_idx_badmagic_lab");
    write_bytes(img_path, images);
    write_bytes(lab_path, labels);
    try {
        nsr::load_idx(img_path.string(), lab_path.string());
        FAIL("expected FormatError");
    } catch (const nsr::FormatError& e) {
        CHECK(std::string(e.what()).find("nsr_idx_badmagic_img") != std::string::npos);
    }
    fs::remove(img_path);
    fs::remove(lab_path);
}

TEST_CASE("load_idx: image/label count mismatch and truncation") {
    std::vector<unsigned char> images;
    push_u32(images, 0x00000803);
    push_u32(images, 2);
    push_u32(images, 1);
    push_u32(images, 1);
    images.push_back(1);
    images.push_back(2);
    std::vector<unsigned char> labels;
    push_u32(labels, 0x00000801);
    push_u32(labels, 3);
    labels.insert(labels.end(), {0, 1, 0});

    const auto img_path = tmp_file("nsr_idx_mismatch_img");
    const auto lab_path = tmp_file("nsr_idx_mismatch_lab");
    write_bytes(img_path, images);
    write_bytes(lab_path, labels);
    CHECK_THROWS_AS(nsr::load_idx(img_path.string(), lab_path.string()), nsr::FormatError);

    // Truncated pixel payload.
    std::vector<unsigned char> truncated;
    push_u32(truncated, 0x00000803);
    push_u32(truncated, 2);
    push_u32(truncated, 1);
    push_u32(truncated, 2);
    truncated.push_back(9); // 3 bytes missing
    write_bytes(img_path, truncated);
    std::vector<unsigned char> two_labels;
    push_u32(two_labels, 0x00000801);
    push_u32(two_labels, 2);
    two_labels.insert(two_labels.end(), {0, 1});
    write_bytes(lab_path, two_labels);
    CHECK_THROWS_AS(nsr::load_idx(img_path.string(), lab_path.string()), nsr::IoError);

    CHECK_THROWS_AS(nsr::load_idx("/nonexistent/images", lab_path.string()), nsr::IoError);
    fs::remove(img_path);
    fs::remove(lab_path);
}

TEST_CASE("idx round-trip: quantized features and exact labels") {
    std::mt19937_64 rng(83);
    Dataset ds;
    ds.features = testutil::random_matrix(20, 6, rng);
    for (double& x : ds.features.data) x = std::abs(x) / 3.0; // into [0, ~1]
    for (double& x : ds.features.data) x = std::min(x, 1.0);
    ds.labels = testutil::random_labels(20, 4, rng);
    ds.num_classes = 4;

    const auto img_path = tmp_file("nsr_idx_rt_img");
    const auto lab_path = tmp_file("nsr_idx_rt_lab");
    nsr::save_idx(ds, img_path.string(), lab_path.string(), 2, 3);
    const Dataset back = nsr::load_idx(img_path.string(), lab_path.string());
    REQUIRE(back.size() == ds.size());
    REQUIRE(back.dim() == ds.dim());
    CHECK(back.labels == ds.labels);
    for (std::size_t i = 0; i < ds.features.size(); ++i) {
        CHECK(std::abs(back.features.data[i] - ds.features.data[i]) <= 0.5 / 255.0 + 1e-12);
    }
    fs::remove(img_path);
    fs::remove(lab_path);
}

TEST_CASE("mnist_split: sizes, determinism, partition") {
    Dataset ds;
    ds.features = Matrix2D(60000, 1);
    ds.labels.resize(60000);
    for (std::size_t i = 0; i < 60000; ++i) {
        ds.features(i, 0) = static_cast<double>(i) / 60000.0;
        ds.labels[i] = static_cast<int>(i % 10);
    }
    ds.num_classes = 10;

    const auto [train, val] = nsr::mnist_split(ds, 5);
    CHECK(train.size() == 50000);
    CHECK(val.size() == 10000);

    const auto [train2, val2] = nsr::mnist_split(ds, 5);
    CHECK(train.features.data == train2.features.data);
    CHECK(val.labels == val2.labels);

    // Union of the feature ids covers the whole set exactly once.
    std::set<long> seen;
    auto collect = [&](const Dataset& part) {
        for (std::size_t i = 0; i < part.size(); ++i) {
            seen.insert(std::lround(part.features(i, 0) * 60000.0));
        }
    };
    collect(train);
    collect(val);
    CHECK(seen.size() == 60000);

    Dataset wrong;
    wrong.features = Matrix2D(100, 1);
    wrong.labels.assign(100, 0);
    wrong.num_classes = 1;
    CHECK_THROWS_AS(nsr::mnist_split(wrong, 1), nsr::InvalidArgument);
}

TEST_CASE("blobs: std 0 collapses classes onto distinct centers with C = 0") {
    const Matrix2D centers = nsr::blob_grid_centers(3, 4, 5.0);
    const Dataset ds = nsr::gaussian_blobs(centers, 10, 0.0, 7);
    CHECK(ds.size() == 30);
    CHECK(nsr::complexity_measure(ds.features, ds.labels, 2.0).value == doctest::Approx(0.0));
}

TEST_CASE("blobs: same seed reproduces the dataset, negative std rejected") {
    const Matrix2D centers = nsr::blob_grid_centers(2, 3, 4.0);
    const Dataset a = nsr::gaussian_blobs(centers, 15, 0.5, 11);
    const Dataset b = nsr::gaussian_blobs(centers, 15, 0.5, 11);
    const Dataset c = nsr::gaussian_blobs(centers, 15, 0.5, 12);
    CHECK(a.features.data == b.features.data);
    CHECK(a.features.data != c.features.data);
    CHECK_THROWS_AS(nsr::gaussian_blobs(centers, 15, -0.1, 1), nsr::InvalidArgument);

    Matrix2D coincident(2, 2);
    coincident(0, 0) = 1.0;
    coincident(1, 0) = 1.0;
    CHECK_THROWS_AS(nsr::gaussian_blobs(coincident, 5, 0.5, 1), nsr::InvalidArgument);
}

TEST_CASE("blobs at +/-5 with std 0.5 are separable: a linear probe hits 100% train accuracy") {
    // Two classes at +/- (5, 5, ..., 5).
    Matrix2D centers(2, 6);
    for (std::size_t k = 0; k < 6; ++k) {
        centers(0, k) = -5.0;
        centers(1, k) = 5.0;
    }
    const Dataset ds = nsr::gaussian_blobs(centers, 40, 0.5, 13);

    nsr::Network probe = nsr::Network::make(
        {{6, 2, nsr::Activation::Identity, 0.0}}, 17);
    auto opt = nsr::OptimizerState::sgd(0.1);
    for (int step = 0; step < 50; ++step) {
        const auto trace = nsr::forward(probe, ds.features, false, 0);
        const auto grads = nsr::backward(probe, trace, ds.labels);
        nsr::optimizer_step(opt, probe, grads);
    }
    const auto trace = nsr::forward(probe, ds.features, false, 0);
    CHECK(nsr::error_rate(nsr::output_logits(probe, trace), ds.labels) == 0.0);
}

TEST_CASE("batches: 10 samples with B=3 give sizes [3,3,3,1]") {
    Dataset ds;
    ds.features = Matrix2D(10, 2, 1.0);
    ds.labels.assign(10, 0);
    ds.num_classes = 1;
    nsr::BatchIterator it(ds, 3, 1);
    std::vector<std::size_t> sizes;
    while (auto batch = it.next()) sizes.push_back(batch->labels.size());
    CHECK(sizes == std::vector<std::size_t>{3, 3, 3, 1});
    CHECK(it.batches_per_epoch() == 4);

    nsr::BatchIterator drop(ds, 3, 1, /*drop_last=*/true);
    sizes.clear();
    while (auto batch = drop.next()) sizes.push_back(batch->labels.size());
    CHECK(sizes == std::vector<std::size_t>{3, 3, 3});
}

TEST_CASE("batches: B equal to the dataset size gives one shuffled batch") {
    Dataset ds;
    ds.features = Matrix2D(8, 1);
    for (std::size_t i = 0; i < 8; ++i) ds.features(i, 0) = static_cast<double>(i);
    ds.labels.assign(8, 0);
    ds.num_classes = 1;
    nsr::BatchIterator it(ds, 8, 3);
    auto batch = it.next();
    REQUIRE(batch.has_value());
    CHECK(batch->labels.size() == 8);
    CHECK_FALSE(it.next().has_value());
    std::multiset<double> values(batch->features.data.begin(), batch->features.data.end());
    for (std::size_t i = 0; i < 8; ++i) CHECK(values.count(static_cast<double>(i)) == 1);
}

TEST_CASE("batches partition each epoch exactly once") {
    Dataset ds;
    ds.features = Matrix2D(23, 1);
    for (std::size_t i = 0; i < 23; ++i) ds.features(i, 0) = static_cast<double>(i);
    ds.labels.assign(23, 0);
    ds.num_classes = 1;
    nsr::BatchIterator it(ds, 5, 9);
    for (std::uint64_t epoch = 0; epoch < 3; ++epoch) {
        it.start_epoch(epoch);
        std::multiset<double> seen;
        while (auto batch = it.next()) {
            seen.insert(batch->features.data.begin(), batch->features.data.end());
        }
        CHECK(seen.size() == 23);
        for (std::size_t i = 0; i < 23; ++i) CHECK(seen.count(static_cast<double>(i)) == 1);
    }
}

TEST_CASE("batches: epoch order differs across epochs but reproduces across runs") {
    Dataset ds;
    ds.features = Matrix2D(16, 1);
    for (std::size_t i = 0; i < 16; ++i) ds.features(i, 0) = static_cast<double>(i);
    ds.labels.assign(16, 0);
    ds.num_classes = 1;

    auto epoch_order = [&](std::uint64_t seed, std::uint64_t epoch) {
        nsr::BatchIterator it(ds, 16, seed);
        it.start_epoch(epoch);
        return it.next()->features.data;
    };
    CHECK(epoch_order(4, 0) != epoch_order(4, 1));
    CHECK(epoch_order(4, 0) == epoch_order(4, 0));
    CHECK(epoch_order(4, 1) == epoch_order(4, 1));
}

TEST_CASE("batch iterator rejects B = 0 and B > dataset size") {
    Dataset ds;
    ds.features = Matrix2D(4, 1, 0.0);
    ds.labels.assign(4, 0);
    ds.num_classes = 1;
    CHECK_THROWS_AS(nsr::BatchIterator(ds, 0, 1), nsr::InvalidArgument);
    CHECK_THROWS_AS(nsr::BatchIterator(ds, 5, 1), nsr::InvalidArgument);
}
