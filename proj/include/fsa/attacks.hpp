#pragma once

#include "fsa/frequency.hpp"
#include "fsa/model.hpp"
#include "fsa/random.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace fsa {

enum class Method { FGSM, IFGSM, MIFGSM, DIFGSM, TIFGSM, PGD };

inline constexpr Method kAllMethods[] = {Method::FGSM,   Method::IFGSM,  Method::MIFGSM,
                                         Method::DIFGSM, Method::TIFGSM, Method::PGD};

std::string_view to_string(Method method);
/// Accepts the canonical names ("IFGSM") and the dashed forms ("I-FGSM"), case-insensitively.
std::optional<Method> parse_method(std::string_view text);

struct AttackConfig {
    Method method = Method::IFGSM;
    double eps = 8.0 / 255.0;
    std::size_t steps = 5;
    /// Per-step size; eps / steps when unset.
    std::optional<double> alpha;
    bool fsa = false;
    DctMode dct_mode = DctMode::PaperLiteral;
    double mi_decay = 1.0;
    double di_prob = 0.5;
    std::size_t ti_kernel_size = 7;
    bool pgd_random_start = true;
    std::uint64_t seed = 0;

    /// FGSM always runs one step of size eps.
    std::size_t effective_steps() const { return method == Method::FGSM ? 1 : steps; }
    double step_size() const;
    /// Throws ArgumentError on out-of-range settings.
    void validate() const;
};

struct MomentumState {
    Tensor accumulator;
};

/// Mutable state of one attack run: the momentum accumulator and two random
/// streams. Input-diversity draws for the base step come from `rng`; draws
/// for the second FSA phase come from `phase2_rng`, so the base-step sequence
/// is the same with and without FSA.
struct AttackState {
    MomentumState momentum;
    Rng rng;
    Rng phase2_rng;

    static AttackState fresh(const Tensor& x, std::uint64_t seed);
};

struct AttackResult {
    Tensor adversarial;
    std::size_t clean_pred = 0;
    std::size_t adv_pred = 0;
    bool success = false;
    double linf = 0.0;
    std::vector<double> mask_ones_fraction_per_step;
};

/// Random nearest-neighbour shrink by a factor in [0.9, 1.0] followed by zero
/// padding back to the original extent at a random offset. Applied with
/// probability p; otherwise the identity.
class DiverseInput {
public:
    static DiverseInput draw(const Shape& shape, double p, Rng& rng);

    bool is_identity() const noexcept { return !applied_; }
    Tensor apply(const Tensor& x) const;
    /// Transpose of apply: maps a gradient at apply(x) back onto x.
    Tensor pullback(const Tensor& grad) const;

private:
    bool applied_ = false;
    std::size_t height_ = 0, width_ = 0;
    std::size_t resized_h_ = 0, resized_w_ = 0;
    std::size_t top_ = 0, left_ = 0;
};

Tensor diverse_input_transform(const Tensor& x, double p, Rng& rng);

/// Normalized 2-D Gaussian, sigma = size / 6. Throws on even size.
Tensor gaussian_kernel(std::size_t size);

/// Depthwise zero-padded convolution of every channel with gaussian_kernel(size).
Tensor translation_smooth(const Tensor& g, std::size_t kernel_size);

/// Method-specific gradient G at x: raw (FGSM, I-FGSM, PGD), momentum
/// accumulator (MI-FGSM), gradient through a diverse-input draw (DI-FGSM) or
/// Gaussian-smoothed gradient (TI-FGSM). When `advance_momentum` is false the
/// MI-FGSM candidate mu*g + grad/|grad|_1 is returned without being stored.
Tensor processed_gradient(const Classifier& model, const Tensor& x, std::size_t label, const AttackConfig& cfg,
                          AttackState& state, bool advance_momentum = true, bool second_phase = false);

/// alpha * sign(G), with G from processed_gradient.
Tensor spatial_step(const Classifier& model, const Tensor& x, std::size_t label, const AttackConfig& cfg,
                    AttackState& state);

/// alpha * sign(frequency_pullback(input_gradient(x))).
Tensor frequency_step(const Classifier& model, const Tensor& x, std::size_t label, const AttackConfig& cfg);

/// alpha * sign(frequency_pullback(gradient)) for an already computed gradient.
Tensor frequency_step(const Tensor& gradient, double alpha, DctMode mode);

/// 1 where the two steps are exactly equal, 0 elsewhere.
Tensor consistency_mask(const Tensor& spatial, const Tensor& frequency);

struct FsaStepResult {
    Tensor next;
    Tensor mask;
    double mask_ones_fraction = 1.0;
};

/// One frequency/spatial consistency step.
///
/// The method's step d is split by the mask m of coordinates where d agrees
/// with the frequency step. Phase one applies m*d; phase two takes a fresh
/// method step d' at the intermediate point and applies it on the remaining
/// coordinates, so every coordinate moves at most alpha.
///
/// The frequency branch sees the same processed gradient as the spatial
/// branch. When the mask is all ones the second phase is skipped.
FsaStepResult fsa_step(const Classifier& model, const Tensor& x, std::size_t label, const AttackConfig& cfg,
                       AttackState& state);

/// Projects onto the L-infinity ball of radius eps around `origin`, then clamps to [0,1].
Tensor project(const Tensor& x, const Tensor& origin, double eps);

AttackResult run_attack(const Classifier& model, const LabeledImage& image, const AttackConfig& cfg);

} // namespace fsa
