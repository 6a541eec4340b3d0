#include "fsa/attacks.hpp"

#include "fsa/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace fsa {

namespace {

std::string normalized_name(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c == '-' || c == '_') continue;
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

Tensor scaled_sign(const Tensor& g, double alpha) {
    Tensor s = sign(g);
    for (double& v : s.values()) v *= alpha;
    return s;
}

} // namespace

std::string_view to_string(Method method) {
    switch (method) {
    case Method::FGSM: return "FGSM";
    case Method::IFGSM: return "IFGSM";
    case Method::MIFGSM: return "MIFGSM";
    case Method::DIFGSM: return "DIFGSM";
    case Method::TIFGSM: return "TIFGSM";
    case Method::PGD: return "PGD";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view text) {
    const std::string name = normalized_name(text);
    for (Method m : kAllMethods) {
        if (name == to_string(m)) return m;
    }
    return std::nullopt;
}

double AttackConfig::step_size() const {
    if (method == Method::FGSM) return eps;
    return alpha.value_or(eps / static_cast<double>(steps));
}

void AttackConfig::validate() const {
    if (!(eps >= 0.0 && eps <= 1.0)) throw ArgumentError("eps must lie in [0,1]");
    if (steps == 0) throw ArgumentError("steps must be at least 1");
    const double a = step_size();
    if (!std::isfinite(a) || a < 0.0 || a > eps || (a == 0.0 && eps > 0.0)) {
        throw ArgumentError("alpha must satisfy 0 < alpha <= eps");
    }
    if (!(mi_decay >= 0.0) || !std::isfinite(mi_decay)) throw ArgumentError("momentum decay must be non-negative");
    if (!(di_prob >= 0.0 && di_prob <= 1.0)) throw ArgumentError("diversity probability must lie in [0,1]");
    if (ti_kernel_size % 2 == 0) throw ArgumentError("translation kernel size must be odd");
}

AttackState AttackState::fresh(const Tensor& x, std::uint64_t seed) {
    return AttackState{MomentumState{Tensor::zeros_like(x)}, Rng(mix_seed(seed, 1)), Rng(mix_seed(seed, 2))};
}

DiverseInput DiverseInput::draw(const Shape& shape, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("diversity probability must lie in [0,1]");
    if (shape.size() != 3) throw ShapeError("diverse input expects [C,H,W]");
    DiverseInput t;
    t.height_ = shape[1];
    t.width_ = shape[2];
    if (!(rng.uniform() < p)) return t;
    const double factor = rng.uniform(0.9, 1.0);
    auto resize = [factor](std::size_t n) {
        const auto r = static_cast<std::size_t>(std::lround(static_cast<double>(n) * factor));
        return std::clamp<std::size_t>(r, 1, n);
    };
    t.applied_ = true;
    t.resized_h_ = resize(t.height_);
    t.resized_w_ = resize(t.width_);
    t.top_ = rng.below(t.height_ - t.resized_h_ + 1);
    t.left_ = rng.below(t.width_ - t.resized_w_ + 1);
    return t;
}

Tensor DiverseInput::apply(const Tensor& x) const {
    if (!applied_) return x;
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t c = 0; c < x.dim(0); ++c) {
        for (std::size_t oy = 0; oy < resized_h_; ++oy) {
            const std::size_t sy = oy * height_ / resized_h_;
            for (std::size_t ox = 0; ox < resized_w_; ++ox) {
                out.at(c, top_ + oy, left_ + ox) = x.at(c, sy, ox * width_ / resized_w_);
            }
        }
    }
    return out;
}

Tensor DiverseInput::pullback(const Tensor& grad) const {
    if (!applied_) return grad;
    Tensor out = Tensor::zeros_like(grad);
    for (std::size_t c = 0; c < grad.dim(0); ++c) {
        for (std::size_t oy = 0; oy < resized_h_; ++oy) {
            const std::size_t sy = oy * height_ / resized_h_;
            for (std::size_t ox = 0; ox < resized_w_; ++ox) {
                out.at(c, sy, ox * width_ / resized_w_) += grad.at(c, top_ + oy, left_ + ox);
            }
        }
    }
    return out;
}

Tensor diverse_input_transform(const Tensor& x, double p, Rng& rng) {
    return DiverseInput::draw(x.shape(), p, rng).apply(x);
}

Tensor gaussian_kernel(std::size_t size) {
    if (size % 2 == 0) throw ArgumentError("Gaussian kernel size must be odd, got " + std::to_string(size));
    const double sigma = static_cast<double>(size) / 6.0;
    const auto centre = static_cast<double>(size / 2);
    Tensor k({1, 1, size, size});
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            const double dy = static_cast<double>(i) - centre;
            const double dx = static_cast<double>(j) - centre;
            const double w = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            k[i * size + j] = w;
            total += w;
        }
    }
    for (double& v : k.values()) v /= total;
    return k;
}

Tensor translation_smooth(const Tensor& g, std::size_t kernel_size) {
    const Tensor kernel = gaussian_kernel(kernel_size);
    if (g.rank() != 3) throw ShapeError("translation_smooth expects [C,H,W]");
    const std::size_t plane = g.dim(1) * g.dim(2);
    Tensor out = Tensor::zeros_like(g);
    for (std::size_t c = 0; c < g.dim(0); ++c) {
        std::vector<double> channel(g.data() + c * plane, g.data() + (c + 1) * plane);
        const Tensor smoothed = conv2d(Tensor({1, g.dim(1), g.dim(2)}, std::move(channel)), kernel, 1, kernel_size / 2);
        std::copy(smoothed.values().begin(), smoothed.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(c * plane));
    }
    return out;
}

Tensor processed_gradient(const Classifier& model, const Tensor& x, std::size_t label, const AttackConfig& cfg,
                          AttackState& state, bool advance_momentum, bool second_phase) {
    switch (cfg.method) {
    case Method::FGSM:
    case Method::IFGSM:
    case Method::PGD:
        return input_gradient(model, x, label);
    case Method::MIFGSM: {
        Tensor grad = input_gradient(model, x, label);
        const double norm = l1_norm(grad);
        if (norm > 0.0) {
            for (double& v : grad.values()) v /= norm;
        }
        Tensor candidate = axpy(grad, cfg.mi_decay, state.momentum.accumulator);
        if (advance_momentum) state.momentum.accumulator = candidate;
        return candidate;
    }
    case Method::DIFGSM: {
        Rng& rng = second_phase ? state.phase2_rng : state.rng;
        const DiverseInput transform = DiverseInput::draw(x.shape(), cfg.di_prob, rng);
        if (transform.is_identity()) return input_gradient(model, x, label);
        return transform.pullback(input_gradient(model, transform.apply(x), label));
    }
    case Method::TIFGSM:
        return translation_smooth(input_gradient(model, x, label), cfg.ti_kernel_size);
    }
    throw ArgumentError("unknown attack method");
}

Tensor spatial_step(const Classifier& model, const Tensor& x, std::size_t label, const AttackConfig& cfg,
                    AttackState& state) {
    return scaled_sign(processed_gradient(model, x, label, cfg, state), cfg.step_size());
}

Tensor frequency_step(const Classifier& model, const Tensor& x, std::size_t label, const AttackConfig& cfg) {
    return frequency_step(input_gradient(model, x, label), cfg.step_size(), cfg.dct_mode);
}

Tensor frequency_step(const Tensor& gradient, double alpha, DctMode mode) {
    return scaled_sign(frequency_pullback(gradient, mode), alpha);
}

Tensor consistency_mask(const Tensor& spatial, const Tensor& frequency) {
    require_same_shape(spatial, frequency, "consistency_mask");
    Tensor mask = Tensor::zeros_like(spatial);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = spatial[i] == frequency[i] ? 1.0 : 0.0;
    return mask;
}

FsaStepResult fsa_step(const Classifier& model, const Tensor& x, std::size_t label, const AttackConfig& cfg,
                       AttackState& state) {
    const double alpha = cfg.step_size();
    const Tensor gradient = processed_gradient(model, x, label, cfg, state);
    const Tensor step = scaled_sign(gradient, alpha);
    FsaStepResult result;
    result.mask = consistency_mask(step, frequency_step(gradient, alpha, cfg.dct_mode));

    result.next = x;
    std::size_t ones = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (result.mask[i] == 1.0) {
            result.next[i] += step[i];
            ++ones;
        }
    }
    result.mask_ones_fraction = static_cast<double>(ones) / static_cast<double>(x.size());
    if (ones == x.size()) return result;

    const Tensor second =
        scaled_sign(processed_gradient(model, result.next, label, cfg, state, false, true), alpha);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (result.mask[i] == 0.0) result.next[i] += second[i];
    }
    return result;
}

Tensor project(const Tensor& x, const Tensor& origin, double eps) {
    require_same_shape(x, origin, "project");
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = std::min(std::max(x[i], origin[i] - eps), origin[i] + eps);
        out[i] = std::min(std::max(v, 0.0), 1.0);
    }
    return out;
}

AttackResult run_attack(const Classifier& model, const LabeledImage& image, const AttackConfig& cfg) {
    cfg.validate();
    validate(image, model.num_classes());
    const Tensor& origin = image.pixels;
    AttackState state = AttackState::fresh(origin, cfg.seed);

    AttackResult result;
    result.clean_pred = predict(model, origin);

    Tensor x = origin;
    if (cfg.method == Method::PGD && cfg.pgd_random_start) {
        for (double& v : x.values()) v += state.rng.uniform(-cfg.eps, cfg.eps);
        x = project(x, origin, cfg.eps);
    }
    const std::size_t steps = cfg.effective_steps();
    for (std::size_t t = 0; t < steps; ++t) {
        if (cfg.fsa) {
            FsaStepResult step = fsa_step(model, x, image.label, cfg, state);
            result.mask_ones_fraction_per_step.push_back(step.mask_ones_fraction);
            x = std::move(step.next);
        } else {
            x = x + spatial_step(model, x, image.label, cfg, state);
        }
        x = project(x, origin, cfg.eps);
    }
    result.adv_pred = predict(model, x);
    result.success = result.adv_pred != image.label;
    result.linf = max_abs_diff(x, origin);
    result.adversarial = std::move(x);
    return result;
}

} // namespace fsa
