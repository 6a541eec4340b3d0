#include "fsa/selftest.hpp"

#include "fsa/attacks.hpp"
#include "fsa/frequency.hpp"
#include "fsa/training.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>

namespace fsa {

namespace {

Tensor random_image(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.uniform();
    return t;
}

// Direct double sum over (u, v, k, m); independent of the plan matrices.
double naive_dct_coefficient(const Tensor& x, std::size_t c, std::size_t u, std::size_t v, DctMode mode) {
    const std::size_t h = x.dim(1), w = x.dim(2);
    double sum = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
        for (std::size_t m = 0; m < w; ++m) {
            sum += x.at(c, k, m) * std::cos(static_cast<double>((2 * k + 1) * u) * std::numbers::pi / (2.0 * h)) *
                   std::cos(static_cast<double>((2 * m + 1) * v) * std::numbers::pi / (2.0 * w));
        }
    }
    if (mode == DctMode::PaperLiteral) return std::pow(2.0 * h, -0.25) * std::pow(2.0 * w, -0.25) * sum;
    const double cu = u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
    const double cv = v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
    return cu * cv * sum;
}

bool check_dct_oracle(Rng& rng) {
    for (DctMode mode : {DctMode::Ortho, DctMode::PaperLiteral}) {
        for (std::size_t h = 1; h <= 6; ++h) {
            const Tensor x = random_image({2, h, 7 - h}, rng);
            const Tensor y = dct2(x, mode);
            for (std::size_t c = 0; c < 2; ++c) {
                for (std::size_t u = 0; u < h; ++u) {
                    for (std::size_t v = 0; v < 7 - h; ++v) {
                        if (std::abs(y.at(c, u, v) - naive_dct_coefficient(x, c, u, v, mode)) > 1e-8) return false;
                    }
                }
            }
        }
    }
    return true;
}

bool check_round_trip(Rng& rng) {
    for (DctMode mode : {DctMode::Ortho, DctMode::PaperLiteral}) {
        for (int i = 0; i < 20; ++i) {
            const Tensor x = random_image({1, 28, 28}, rng);
            if (max_abs_diff(idct2(dct2(x, mode), mode), x) > 1e-8) return false;
        }
    }
    return true;
}

bool check_ortho_pullback(Rng& rng) {
    for (int i = 0; i < 50; ++i) {
        Tensor g = random_image({1, 12, 12}, rng);
        for (double& v : g.values()) v -= 0.5;
        if (!(sign(frequency_pullback(g, DctMode::Ortho)) == sign(g))) return false;
    }
    return true;
}

Classifier small_cnn(std::uint64_t seed) {
    const ArchitectureSpec arch{{1, 8, 8},
                                {ConvSpec{3, 3, 1, 1}, ReLU{}, MaxPool2d{2}, Flatten{}, LinearSpec{8}, ReLU{},
                                 LinearSpec{3}}};
    return initialize(arch, seed);
}

bool check_gradient(Rng& rng) {
    const Classifier model = small_cnn(7);
    const Tensor x = random_image({1, 8, 8}, rng);
    const Tensor analytic = input_gradient(model, x, 1);
    const double h = 1e-5;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor plus = x, minus = x;
        plus[i] += h;
        minus[i] -= h;
        const double fd = (cross_entropy(forward(model, plus), 1) - cross_entropy(forward(model, minus), 1)) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
        if (std::abs(fd - analytic[i]) / scale > 1e-4) return false;
    }
    return true;
}

bool check_budget_and_degeneracy(Rng& rng) {
    const Classifier model = small_cnn(11);
    for (Method method : kAllMethods) {
        LabeledImage image{random_image({1, 8, 8}, rng), 0};
        AttackConfig cfg;
        cfg.method = method;
        cfg.eps = 8.0 / 255.0;
        cfg.steps = 4;
        cfg.ti_kernel_size = 3;
        cfg.seed = 5;
        cfg.dct_mode = DctMode::Ortho;
        const AttackResult base = run_attack(model, image, cfg);
        cfg.fsa = true;
        const AttackResult wrapped = run_attack(model, image, cfg);
        if (!(base.adversarial == wrapped.adversarial)) return false;
        cfg.dct_mode = DctMode::PaperLiteral;
        const AttackResult literal = run_attack(model, image, cfg);
        for (const AttackResult* r : {&base, &wrapped, &literal}) {
            if (r->linf > cfg.eps + 1e-9) return false;
            if (linf_norm(r->adversarial) > 1.0) return false;
        }
    }
    return true;
}

} // namespace

bool run_selftest(std::ostream& out) {
    Rng rng(2024);
    const std::pair<const char*, std::function<bool(Rng&)>> checks[] = {
        {"dct2 matches the direct cosine sum", check_dct_oracle},
        {"idct2(dct2(x)) recovers x", check_round_trip},
        {"orthonormal pullback preserves gradient signs", check_ortho_pullback},
        {"input gradient matches central differences", check_gradient},
        {"budget holds and ortho FSA equals the base attack", check_budget_and_degeneracy},
    };
    bool all = true;
    for (const auto& [name, check] : checks) {
        bool ok = false;
        try {
            ok = check(rng);
        } catch (const std::exception& e) {
            out << "  (" << e.what() << ")\n";
        }
        out << (ok ? "PASS " : "FAIL ") << name << '\n';
        all = all && ok;
    }
    return all;
}

} // namespace fsa
