#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "loss.hpp"
#include "network.hpp"
#include "test_util.hpp"

using nsr::Activation;
using nsr::ForwardTrace;
using nsr::LayerSpec;
using nsr::Matrix2D;
using nsr::Network;

namespace {

Network tiny_net(const std::vector<LayerSpec>& specs, std::uint64_t seed = 3) {
    return Network::make(specs, seed);
}

} // namespace

TEST_CASE("forward: all-zero parameters give all-zero relu responses") {
    Network net = tiny_net({{3, 4, Activation::Relu, 0.0}, {4, 2, Activation::Relu, 0.0}});
    for (auto& w : net.weights) w.fill(0.0);
    std::mt19937_64 rng(1);
    const Matrix2D x = testutil::random_matrix(5, 3, rng);
    const ForwardTrace trace = nsr::forward(net, x, false, 0);
    for (const auto& post : trace.post_activations) {
        for (double v : post.data) CHECK(v == 0.0);
    }
}

TEST_CASE("forward: identity weights pass the input through") {
    Network net = tiny_net({{3, 3, Activation::Identity, 0.0}});
    net.weights[0].fill(0.0);
    for (std::size_t i = 0; i < 3; ++i) net.weights[0](i, i) = 1.0;
    std::mt19937_64 rng(2);
    const Matrix2D x = testutil::random_matrix(4, 3, rng);
    const ForwardTrace trace = nsr::forward(net, x, false, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(trace.post_activations[0].data[i] == doctest::Approx(x.data[i]));
    }
}

TEST_CASE("forward: W=[[2]], b=[1], relu, input -3 gives pre -5, post 0") {
    Network net = tiny_net({{1, 1, Activation::Relu, 0.0}});
    net.weights[0](0, 0) = 2.0;
    net.biases[0][0] = 1.0;
    Matrix2D x(1, 1);
    x(0, 0) = -3.0;
    const ForwardTrace trace = nsr::forward(net, x, false, 0);
    CHECK(trace.pre_activations[0](0, 0) == doctest::Approx(-5.0));
    CHECK(trace.post_activations[0](0, 0) == 0.0);
}

TEST_CASE("forward rejects a feature-dimension mismatch") {
    Network net = tiny_net({{3, 2, Activation::Relu, 0.0}});
    CHECK_THROWS_AS(nsr::forward(net, Matrix2D(2, 4), false, 0), nsr::ShapeError);
}

TEST_CASE("forward is deterministic given (net, batch, seed)") {
    Network net = tiny_net({{5, 6, Activation::Relu, 0.4}, {6, 3, Activation::Identity, 0.0}});
    std::mt19937_64 rng(3);
    const Matrix2D x = testutil::random_matrix(7, 5, rng);
    const ForwardTrace a = nsr::forward(net, x, true, 99);
    const ForwardTrace b = nsr::forward(net, x, true, 99);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        CHECK(a.post_activations[l].data == b.post_activations[l].data);
    }
    const ForwardTrace c = nsr::forward(net, x, true, 100);
    CHECK(a.post_activations[0].data != c.post_activations[0].data);
}

TEST_CASE("dropout: eval mode is the identity, rate 0 is the identity in train mode") {
    Network net = tiny_net({{4, 8, Activation::Relu, 0.5}, {8, 2, Activation::Identity, 0.0}});
    std::mt19937_64 rng(4);
    const Matrix2D x = testutil::random_matrix(6, 4, rng);

    const ForwardTrace eval_trace = nsr::forward(net, x, false, 7);
    Network no_dropout = net;
    no_dropout.layers[0].dropout_rate = 0.0;
    const ForwardTrace plain = nsr::forward(no_dropout, x, false, 7);
    CHECK(eval_trace.post_activations[0].data == plain.post_activations[0].data);

    const ForwardTrace train_rate0 = nsr::forward(no_dropout, x, true, 7);
    CHECK(train_rate0.post_activations[0].data == plain.post_activations[0].data);

    // With rate > 0 in train mode, kept units are scaled by 1/(1-rate).
    const ForwardTrace dropped = nsr::forward(net, x, true, 7);
    bool saw_zeroed = false;
    for (std::size_t i = 0; i < dropped.post_activations[0].size(); ++i) {
        const double v = dropped.post_activations[0].data[i];
        const double base = plain.post_activations[0].data[i];
        if (v == 0.0 && base != 0.0) {
            saw_zeroed = true;
        } else if (base != 0.0) {
            CHECK(v == doctest::Approx(base * 2.0));
        }
    }
    CHECK(saw_zeroed);
}

TEST_CASE("softmax_output is final-layer only and produces row distributions") {
    CHECK_THROWS_AS(tiny_net({{3, 3, Activation::SoftmaxOutput, 0.0},
                              {3, 2, Activation::Identity, 0.0}}),
                    nsr::InvalidArgument);

    Network net = tiny_net({{3, 4, Activation::Relu, 0.0}, {4, 3, Activation::SoftmaxOutput, 0.0}});
    std::mt19937_64 rng(5);
    const Matrix2D x = testutil::random_matrix(5, 3, rng);
    const ForwardTrace trace = nsr::forward(net, x, false, 0);
    const Matrix2D& probs = trace.post_activations[1];
    for (std::size_t i = 0; i < probs.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < probs.cols; ++j) {
            CHECK(probs(i, j) >= 0.0);
            sum += probs(i, j);
        }
        CHECK(sum == doctest::Approx(1.0));
    }
    // The response/logits of a softmax layer are its pre-activations.
    CHECK(&nsr::output_logits(net, trace) == &trace.pre_activations[1]);
}

TEST_CASE("backward matches central finite differences of cross-entropy") {
    std::mt19937_64 rng(6);
    const std::vector<std::vector<LayerSpec>> architectures = {
        {{4, 5, Activation::Relu, 0.0}, {5, 3, Activation::Identity, 0.0}},
        {{3, 6, Activation::Relu, 0.0},
         {6, 4, Activation::Relu, 0.0},
         {4, 3, Activation::Identity, 0.0}},
        {{5, 4, Activation::Identity, 0.0}, {4, 2, Activation::SoftmaxOutput, 0.0}},
        {{4, 4, Activation::Relu, 0.5}, {4, 3, Activation::Identity, 0.0}},
    };
    for (std::size_t arch = 0; arch < architectures.size(); ++arch) {
        Network net = Network::make(architectures[arch], 11 + arch);
        const std::size_t batch = 4;
        const Matrix2D x = testutil::random_matrix(batch, net.input_dim(), rng);
        const std::vector<int> labels =
            testutil::random_labels(batch, static_cast<int>(net.output_dim()), rng);
        const bool train_mode = net.layers[0].dropout_rate > 0.0;
        const std::uint64_t seed = 21;

        const ForwardTrace trace = nsr::forward(net, x, train_mode, seed);
        const nsr::Gradients grads = nsr::backward(net, trace, labels);

        auto loss_fn = [&]() {
            const ForwardTrace t = nsr::forward(net, x, train_mode, seed);
            return testutil::ce_value(nsr::output_logits(net, t), labels);
        };
        const double err = testutil::max_grad_rel_error(net, grads, loss_fn);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("backward: all-zero injected gradients equal plain cross-entropy backward") {
    std::mt19937_64 rng(8);
    Network net = tiny_net({{3, 5, Activation::Relu, 0.0}, {5, 2, Activation::Identity, 0.0}});
    const Matrix2D x = testutil::random_matrix(4, 3, rng);
    const std::vector<int> labels = testutil::random_labels(4, 2, rng);
    const ForwardTrace trace = nsr::forward(net, x, false, 0);

    const nsr::Gradients plain = nsr::backward(net, trace, labels);
    std::map<std::size_t, Matrix2D> zeros;
    zeros.emplace(0, Matrix2D(4, 5));
    zeros.emplace(1, Matrix2D(4, 2));
    const nsr::Gradients injected = nsr::backward(net, trace, labels, &zeros);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        CHECK(plain.weights[l].data == injected.weights[l].data);
        CHECK(plain.biases[l] == injected.biases[l]);
    }
}

TEST_CASE("backward: saturated correct logits give vanishing gradients") {
    Network net = tiny_net({{2, 2, Activation::Identity, 0.0}});
    net.weights[0].fill(0.0);
    net.weights[0](0, 0) = 1.0;
    net.biases[0] = {1000.0, -1000.0};
    Matrix2D x(1, 2);
    x(0, 0) = 1.0;
    const std::vector<int> labels{0};
    const ForwardTrace trace = nsr::forward(net, x, false, 0);
    CHECK(nsr::cross_entropy(nsr::output_logits(net, trace), labels) ==
          doctest::Approx(0.0).epsilon(1e-12));
    const nsr::Gradients grads = nsr::backward(net, trace, labels);
    for (double g : grads.weights[0].data) CHECK(std::abs(g) < 1e-12);
    for (double g : grads.biases[0]) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("backward rejects mis-shaped injected gradients") {
    Network net = tiny_net({{3, 4, Activation::Relu, 0.0}, {4, 2, Activation::Identity, 0.0}});
    Matrix2D x(2, 3, 0.5);
    const std::vector<int> labels{0, 1};
    const ForwardTrace trace = nsr::forward(net, x, false, 0);
    std::map<std::size_t, Matrix2D> bad;
    bad.emplace(0, Matrix2D(2, 3));
    CHECK_THROWS_AS(nsr::backward(net, trace, labels, &bad), nsr::ShapeError);
    std::map<std::size_t, Matrix2D> bad_layer;
    bad_layer.emplace(5, Matrix2D(2, 2));
    CHECK_THROWS_AS(nsr::backward(net, trace, labels, &bad_layer), nsr::ShapeError);
}

TEST_CASE("network serialization round-trips with version byte 0x01") {
    Network net = Network::make_mlp(7, {5, 4}, 3, 13, 0.25);
    const std::string path = (std::filesystem::temp_directory_path() / "nsr_net_test.bin").string();
    net.save(path);

    {
        std::ifstream in(path, std::ios::binary);
        char first = 0;
        in.read(&first, 1);
        CHECK(static_cast<unsigned char>(first) == 0x01);
    }

    const Network loaded = Network::load(path);
    REQUIRE(loaded.num_layers() == net.num_layers());
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        CHECK(loaded.layers[l].input_dim == net.layers[l].input_dim);
        CHECK(loaded.layers[l].output_dim == net.layers[l].output_dim);
        CHECK(loaded.layers[l].activation == net.layers[l].activation);
        CHECK(loaded.layers[l].dropout_rate == net.layers[l].dropout_rate);
        CHECK(loaded.weights[l].data == net.weights[l].data);
        CHECK(loaded.biases[l] == net.biases[l]);
    }

    // Corrupt the version byte.
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        const char bad = 0x7f;
        f.write(&bad, 1);
    }
    CHECK_THROWS_AS(Network::load(path), nsr::FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("mlp builder chains layer dims and validates") {
    const Network net = Network::make_mlp(784, {256, 100}, 10, 1);
    REQUIRE(net.num_layers() == 3);
    CHECK(net.layers[0].input_dim == 784);
    CHECK(net.layers[0].output_dim == 256);
    CHECK(net.layers[1].output_dim == 100);
    CHECK(net.layers[2].output_dim == 10);
    CHECK(net.layers[2].activation == Activation::Identity);
    CHECK(net.layers[0].activation == Activation::Relu);

    Network broken = net;
    broken.layers[1].input_dim = 99;
    CHECK_THROWS_AS(broken.validate(), nsr::ShapeError);
}

TEST_CASE("weight init is seeded and fan-in scaled") {
    const Network a = Network::make_mlp(16, {8}, 4, 5);
    const Network b = Network::make_mlp(16, {8}, 4, 5);
    const Network c = Network::make_mlp(16, {8}, 4, 6);
    CHECK(a.weights[0].data == b.weights[0].data);
    CHECK(a.weights[0].data != c.weights[0].data);
    const double limit = std::sqrt(6.0 / 16.0);
    for (double w : a.weights[0].data) {
        CHECK(std::abs(w) <= limit);
    }
    for (double bias : a.biases[0]) CHECK(bias == 0.0);
}
