// Regression checks against the frozen desk CNN and the 1000-image fixture.

#include "doctest.h"

#include "fsa/attacks.hpp"
#include "fsa/dataset.hpp"
#include "fsa/evaluation.hpp"
#include "fsa/training.hpp"
#include "fsa/weights.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace fsa;
namespace fs = std::filesystem;

namespace {

const fs::path kData = FSA_DATA_DIR;

const Classifier& frozen_cnn() {
    static const Classifier model = load_weights(kData / "desk_cnn.fsaw");
    return model;
}

const Dataset& fixture() {
    static const Dataset data = load_idx(kData / "fixture-images-idx3-ubyte", kData / "fixture-labels-idx1-ubyte");
    return data;
}

// Minimal IDX reader written against the format description only.
struct RawIdx {
    std::vector<unsigned char> bytes;
    explicit RawIdx(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    unsigned long be(std::size_t at) const {
        return (bytes[at] << 24) | (bytes[at + 1] << 16) | (bytes[at + 2] << 8) | bytes[at + 3];
    }
};

} // namespace

TEST_SUITE("fixture") {

TEST_CASE("fixture files agree with an independent reader") {
    const RawIdx images(kData / "fixture-images-idx3-ubyte");
    const RawIdx labels(kData / "fixture-labels-idx1-ubyte");
    REQUIRE(images.be(0) == 2051);
    REQUIRE(labels.be(0) == 2049);
    const std::size_t rows = images.be(8), cols = images.be(12);
    CHECK(images.be(4) == 1000);
    const Dataset& d = fixture();
    REQUIRE(d.images.size() == 1000);
    CHECK(d.class_count == 10);
    for (std::size_t n = 0; n < 10; ++n) {
        Tensor want({1, rows, cols});
        for (std::size_t i = 0; i < rows * cols; ++i) want[i] = images.bytes[16 + n * rows * cols + i] / 255.0;
        CHECK(d.images[n].pixels == want);
        CHECK(d.images[n].label == labels.bytes[8 + n]);
    }
}

TEST_CASE("frozen CNN accuracy") {
    CHECK(accuracy(frozen_cnn(), fixture().images) >= 0.95);
    const Dataset train = head(load_idx(kData / "train-images-idx3-ubyte", kData / "train-labels-idx1-ubyte"), 500);
    CHECK(accuracy(frozen_cnn(), train.images) >= 0.95);
}

TEST_CASE("literal frequency step differs from the spatial step on almost every image") {
    AttackConfig cfg;
    std::size_t differing = 0;
    const std::size_t n = 200;
    for (std::size_t i = 0; i < n; ++i) {
        const LabeledImage& img = fixture().images[i];
        AttackState state = AttackState::fresh(img.pixels, 0);
        differing += !(frequency_step(frozen_cnn(), img.pixels, img.label, cfg) ==
                       spatial_step(frozen_cnn(), img.pixels, img.label, cfg, state));
    }
    CHECK(differing >= n * 99 / 100);
}

TEST_CASE("recorded I-FGSM success on the full fixture") {
    AttackConfig cfg;
    cfg.eps = 8.0 / 255.0;
    cfg.steps = 5;
    const EvalReport r = evaluate(frozen_cnn(), fixture(), cfg);
    CHECK(r.n_eligible == 973);
    CHECK(r.n_success == 58);
}

TEST_CASE("success rate does not fall as the budget grows") {
    const Dataset subset = head(fixture(), 200);
    for (const auto& [method, fsa] : {std::pair{Method::IFGSM, false}, {Method::IFGSM, true}, {Method::TIFGSM, false}}) {
        double previous = 0.0;
        for (int k = 1; k <= 5; ++k) {
            AttackConfig cfg;
            cfg.method = method;
            cfg.eps = 8.0 * k / 255.0;
            cfg.fsa = fsa;
            const double rate = evaluate(frozen_cnn(), subset, cfg).success_rate;
            CHECK(rate >= previous - 0.01);
            previous = rate;
        }
    }
}

}
