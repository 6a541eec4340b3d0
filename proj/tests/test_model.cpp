#include "doctest.h"
#include "oracles.hpp"

#include "fsa/errors.hpp"
#include "fsa/model.hpp"
#include "fsa/training.hpp"
#include "fsa/weights.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <string>

using namespace fsa;

namespace {

Classifier linear_model(const Tensor& w, const Tensor& b, Shape input) {
    return Classifier(std::move(input), {Flatten{}, Linear{w, b}});
}

// Builds a weight file byte by byte from the documented layout.
struct FileBuilder {
    std::string bytes = "FSAW\x01";
    FileBuilder& u8(std::uint8_t v) {
        bytes.push_back(static_cast<char>(v));
        return *this;
    }
    FileBuilder& u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        return *this;
    }
    FileBuilder& f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
        return *this;
    }
    FileBuilder& tensor(const Shape& shape, double fill) {
        u32(static_cast<std::uint32_t>(shape.size()));
        for (std::size_t e : shape) u32(static_cast<std::uint32_t>(e));
        for (std::size_t i = 0; i < element_count(shape); ++i) f64(fill);
        return *this;
    }
};

// input [1,2,2] -> flatten -> linear with the given weight extents.
std::string flatten_linear_file(std::size_t outputs, std::size_t inputs) {
    FileBuilder f;
    f.u32(3).u32(1).u32(2).u32(2).u32(2);
    f.u8(5).u32(0).u32(0);
    f.u8(2).u32(0).u32(2).tensor({outputs, inputs}, 0.25).tensor({outputs}, -1.0);
    return f.bytes;
}

void check_input_gradient(const Classifier& model, Rng& rng, std::size_t coordinates) {
    const Tensor x = oracle::random_tensor(model.input_shape(), rng, 0.0, 1.0);
    const std::size_t label = rng.below(model.num_classes());
    const Tensor g = input_gradient(model, x, label);
    REQUIRE(g.shape() == x.shape());
    for (std::size_t n = 0; n < coordinates; ++n) {
        const std::size_t i = rng.below(x.size());
        CHECK(oracle::relative_error(g[i], oracle::finite_difference(model, x, label, i)) < 1e-4);
    }
}

ArchitectureSpec toy_spec() { return {{1, 1, 2}, {Flatten{}, LinearSpec{2}}}; }

std::vector<LabeledImage> separable_toy_set() {
    std::vector<LabeledImage> data;
    Rng rng(5);
    for (int i = 0; i < 64; ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        if (std::abs(a - b) < 0.1) continue;
        data.push_back({Tensor({1, 1, 2}, std::vector<double>{a, b}), a > b ? 0u : 1u});
    }
    return data;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("zero network gives zero logits") {
    const Classifier m = linear_model(Tensor({3, 4}), Tensor({3}), {1, 2, 2});
    Rng rng(1);
    CHECK(forward(m, oracle::random_tensor({1, 2, 2}, rng, 0, 1)) == Tensor({3}));
}

TEST_CASE("single linear layer computes W x + b") {
    Rng rng(2);
    const Tensor w = oracle::random_tensor({3, 4}, rng), b = oracle::random_tensor({3}, rng);
    const Tensor x = oracle::random_tensor({1, 2, 2}, rng, 0, 1);
    const Tensor z = forward(linear_model(w, b, {1, 2, 2}), x);
    for (std::size_t o = 0; o < 3; ++o) {
        double want = b[o];
        for (std::size_t i = 0; i < 4; ++i) want += w[o * 4 + i] * x[i];
        CHECK(z[o] == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("cross-entropy examples") {
    CHECK(cross_entropy(Tensor({5}, 0.3), 2) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
    CHECK(cross_entropy(Tensor({2}, std::vector<double>{1e6, 0.0}), 0) == doctest::Approx(0.0));
    const double want = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
    CHECK(cross_entropy(Tensor({3}, std::vector<double>{1, 2, 3}), 2) == doctest::Approx(want).epsilon(1e-14));
    CHECK_THROWS_AS(cross_entropy(Tensor({3}), 3), ArgumentError);
}

TEST_CASE("softmax sums to one and the loss is non-negative") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const double scale = std::pow(10.0, rng.uniform(-3, 4));
        const Tensor z = scale * oracle::random_tensor({2 + rng.below(9)}, rng);
        double sum = 0.0;
        const Tensor p = softmax(z);
        for (double v : p.values()) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(cross_entropy(z, rng.below(z.size())) >= 0.0);
    }
}

TEST_CASE("linear gradient has the closed form W^T (softmax - onehot)") {
    Rng rng(4);
    const Tensor w = oracle::random_tensor({4, 6}, rng), b = oracle::random_tensor({4}, rng);
    const Classifier m = linear_model(w, b, {1, 2, 3});
    const Tensor x = oracle::random_tensor({1, 2, 3}, rng, 0, 1);
    Tensor r = softmax(forward(m, x));
    r[1] -= 1.0;
    const Tensor g = input_gradient(m, x, 1);
    for (std::size_t i = 0; i < 6; ++i) {
        double want = 0.0;
        for (std::size_t o = 0; o < 4; ++o) want += w[o * 6 + i] * r[o];
        CHECK(g[i] == doctest::Approx(want).epsilon(1e-13));
    }
}

TEST_CASE("two-class uniform logits give logit gradient [-0.5, 0.5]") {
    const Tensor eye({2, 2}, std::vector<double>{1, 0, 0, 1});
    const Classifier m = linear_model(eye, Tensor({2}), {1, 1, 2});
    const Tensor g = input_gradient(m, Tensor({1, 1, 2}, 0.4), 0);
    CHECK(g == Tensor({1, 1, 2}, std::vector<double>{-0.5, 0.5}));
}

TEST_CASE("input gradient matches finite differences for every layer type") {
    Rng rng(6);
    const std::vector<ArchitectureSpec> specs = {
        {{1, 3, 3}, {Flatten{}, LinearSpec{4}}},
        {{2, 3, 3}, {Flatten{}, LinearSpec{5}, ReLU{}, LinearSpec{3}}},
        {{1, 6, 6}, {ConvSpec{3, 3, 1, 0}, Flatten{}, LinearSpec{3}}},
        {{2, 7, 7}, {ConvSpec{2, 3, 2, 1}, ReLU{}, Flatten{}, LinearSpec{4}}},
        {{1, 8, 8}, {ConvSpec{3, 3, 1, 1}, MaxPool2d{2}, Flatten{}, LinearSpec{3}}},
        {{1, 9, 9}, {ConvSpec{2, 3, 1, 1}, ReLU{}, MaxPool2d{3}, Flatten{}, LinearSpec{2}}},
    };
    for (std::size_t s = 0; s < specs.size(); ++s) {
        CAPTURE(s);
        check_input_gradient(initialize(specs[s], 100 + s), rng, 100);
    }
}

TEST_CASE("parameter gradients match finite differences") {
    Rng rng(7);
    Classifier m = initialize({{1, 6, 6}, {ConvSpec{2, 3, 1, 1}, ReLU{}, MaxPool2d{2}, Flatten{}, LinearSpec{3}}}, 9);
    const Tensor x = oracle::random_tensor({1, 6, 6}, rng, 0, 1);
    const LossGradients grads = full_gradients(m, x, 2);
    CHECK(grads.loss == doctest::Approx(cross_entropy(forward(m, x), 2)).epsilon(1e-14));
    CHECK(max_abs_diff(grads.input, input_gradient(m, x, 2)) == 0.0);
    auto& conv = std::get<Conv2d>(m.mutable_layers()[0]);
    for (std::size_t i = 0; i < conv.weights.size(); i += 3) {
        const double saved = conv.weights[i];
        conv.weights[i] = saved + 1e-5;
        const double up = cross_entropy(forward(m, x), 2);
        conv.weights[i] = saved - 1e-5;
        const double down = cross_entropy(forward(m, x), 2);
        conv.weights[i] = saved;
        CHECK(oracle::relative_error(grads.parameters.weights[0][i], (up - down) / 2e-5) < 1e-4);
    }
    CHECK(grads.parameters.weights[1].empty());
}

TEST_CASE("forward rejects a mismatched input and is deterministic") {
    const Classifier m = initialize(cnn_architecture(), 1);
    CHECK_THROWS_AS(forward(m, Tensor({1, 27, 28})), ArgumentError);
    Rng rng(8);
    const Tensor x = oracle::random_tensor({1, 28, 28}, rng, 0, 1);
    CHECK(forward(m, x) == forward(m, x));
}

TEST_CASE("classifier checks that layer shapes compose") {
    CHECK_THROWS_AS(Classifier({1, 2, 2}, {Flatten{}, Linear{Tensor({3, 5}), Tensor({3})}}), ShapeError);
    CHECK_THROWS_AS(Classifier({1, 2, 2}, {Flatten{}, Linear{Tensor({3, 4}), Tensor({2})}}), ShapeError);
    CHECK_THROWS_AS(Classifier({1, 4, 4}, {Conv2d{Tensor({2, 1, 3, 3}), Tensor({2}), 1, 0}}), ShapeError);
    CHECK_THROWS_AS(Classifier({1, 2, 2}, {Flatten{}, Linear{Tensor({1, 4}), Tensor({1})}}), ShapeError);
    const Classifier ok = initialize(cnn_architecture(), 0);
    CHECK(ok.num_classes() == 10);
    CHECK(ok.activation_shape(3) == Shape{16, 14, 14});
    CHECK(ok.activation_shape(7) == Shape{1568});
}

TEST_CASE("image validation") {
    CHECK_THROWS_AS(validate({Tensor({1, 2, 2}, 1.5), 0}, 10), ArgumentError);
    CHECK_THROWS_AS(validate({Tensor({1, 2, 2}, 0.5), 10}, 10), ArgumentError);
    CHECK_NOTHROW(validate({Tensor({1, 2, 2}, 1.0), 9}, 10));
}

TEST_CASE("training lowers the loss on a separable set and is reproducible") {
    const auto data = separable_toy_set();
    TrainOptions opts;
    opts.epochs = 3;
    opts.learning_rate = 0.1;
    opts.batch_size = 8;
    opts.seed = 4;
    std::vector<double> losses{mean_loss(initialize(toy_spec(), opts.seed), data)};
    opts.on_epoch = [&](std::size_t, const Classifier& m) { losses.push_back(mean_loss(m, data)); };
    const Classifier a = train(toy_spec(), data, opts);
    REQUIRE(losses.size() == 4);
    for (std::size_t k = 1; k < losses.size(); ++k) CHECK(losses[k] <= losses[k - 1]);
    opts.on_epoch = nullptr;
    CHECK(serialize_weights(train(toy_spec(), data, opts)) == serialize_weights(a));
    CHECK_THROWS_AS(train(toy_spec(), {}, opts), ArgumentError);
}

TEST_CASE("weights round-trip bit for bit") {
    Rng rng(9);
    for (const auto& arch : {mlp_architecture(), cnn_architecture({1, 12, 12}, 3)}) {
        const Classifier m = initialize(arch, 77);
        const std::string bytes = serialize_weights(m);
        const Classifier back = parse_weights(bytes);
        CHECK(serialize_weights(back) == bytes);
        for (int i = 0; i < 5; ++i) {
            const Tensor x = oracle::random_tensor(arch.input_shape, rng, 0, 1);
            CHECK(forward(back, x) == forward(m, x));
        }
    }
    const auto path = std::filesystem::temp_directory_path() / "fsa_test_roundtrip.fsaw";
    const Classifier m = initialize(cnn_architecture(), 3);
    save_weights(m, path);
    CHECK(serialize_weights(load_weights(path)) == serialize_weights(m));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_weights(path), IoError);
}

TEST_CASE("hand-assembled weight file parses") {
    const Classifier m = parse_weights(flatten_linear_file(2, 4));
    CHECK(forward(m, Tensor({1, 2, 2}, 1.0)) == Tensor({2}, std::vector<double>{0.0, 0.0}));
}

TEST_CASE("malformed weight files are rejected") {
    const std::string good = serialize_weights(initialize(mlp_architecture({1, 3, 3}, 2), 1));
    for (std::size_t n = 0; n < good.size(); n += 1 + n / 7) {
        CAPTURE(n);
        CHECK_THROWS_AS(parse_weights(std::string_view(good).substr(0, n)), ParseError);
    }
    CHECK_THROWS_AS(parse_weights("FSAX" + good.substr(4)), ParseError);
    CHECK_THROWS_AS(parse_weights(good + "x"), ParseError);
    std::string bad_tag = flatten_linear_file(2, 4);
    bad_tag[4 + 1 + 4 * 4 + 4] = 9;
    CHECK_THROWS_AS(parse_weights(bad_tag), ParseError);
    try {
        parse_weights(std::string_view(good).substr(0, 30));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("layer") != std::string::npos);
    }
}

TEST_CASE("weight file with a mismatched declared shape is a shape error") {
    CHECK_THROWS_AS(parse_weights(flatten_linear_file(2, 5)), ShapeError);
}

}
