#include "fsa/training.hpp"

#include "fsa/errors.hpp"
#include "fsa/random.hpp"

#include <cmath>
#include <numeric>

namespace fsa {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
    return t;
}

void add_scaled(Tensor& target, double scale, const Tensor& source) {
    for (std::size_t i = 0; i < target.size(); ++i) target[i] += scale * source[i];
}

} // namespace

ArchitectureSpec mlp_architecture(Shape input_shape, std::size_t classes) {
    return {std::move(input_shape), {Flatten{}, LinearSpec{128}, ReLU{}, LinearSpec{classes}}};
}

ArchitectureSpec cnn_architecture(Shape input_shape, std::size_t classes) {
    return {std::move(input_shape),
            {ConvSpec{16, 3, 1, 1}, ReLU{}, MaxPool2d{2}, ConvSpec{32, 3, 1, 1}, ReLU{}, MaxPool2d{2}, Flatten{},
             LinearSpec{classes}}};
}

std::optional<ArchitectureSpec> architecture_by_name(std::string_view name) {
    if (name == "mlp") return mlp_architecture();
    if (name == "cnn") return cnn_architecture();
    return std::nullopt;
}

Classifier initialize(const ArchitectureSpec& arch, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x1417));
    std::vector<Layer> layers;
    Shape current = arch.input_shape;
    for (const LayerSpec& spec : arch.layers) {
        Layer layer = std::visit(
            Overloaded{
                [&](const ConvSpec& c) -> Layer {
                    if (current.size() != 3) throw ShapeError("convolution needs a [C,H,W] input");
                    const std::size_t fan_in = current[0] * c.kernel * c.kernel;
                    return Conv2d{he_uniform({c.filters, current[0], c.kernel, c.kernel}, fan_in, rng),
                                  Tensor({c.filters}), c.stride, c.padding};
                },
                [&](const LinearSpec& l) -> Layer {
                    if (current.size() != 1) throw ShapeError("linear layer needs a flattened input");
                    return Linear{he_uniform({l.outputs, current[0]}, current[0], rng), Tensor({l.outputs})};
                },
                [](const auto& other) -> Layer { return other; },
            },
            spec);
        layers.push_back(std::move(layer));
        current = std::visit(
            Overloaded{
                [&](const Conv2d& c) -> Shape {
                    return {c.weights.dim(0), conv_output_extent(current[1], c.weights.dim(2), c.stride, c.padding),
                            conv_output_extent(current[2], c.weights.dim(3), c.stride, c.padding)};
                },
                [&](const Linear& l) -> Shape { return {l.weights.dim(0)}; },
                [&](const ReLU&) { return current; },
                [&](const MaxPool2d& p) -> Shape { return {current[0], current[1] / p.size, current[2] / p.size}; },
                [&](const Flatten&) -> Shape { return {element_count(current)}; },
            },
            layers.back());
    }
    return Classifier(arch.input_shape, std::move(layers));
}

Classifier train(const ArchitectureSpec& arch, std::span<const LabeledImage> data, const TrainOptions& options) {
    if (data.empty()) throw ArgumentError("train: empty dataset");
    if (options.batch_size == 0) throw ArgumentError("train: batch size must be positive");
    Classifier model = initialize(arch, options.seed);
    for (const LabeledImage& image : data) validate(image, model.num_classes());

    auto& layers = model.mutable_layers();
    std::vector<Tensor> weight_velocity(layers.size());
    std::vector<Tensor> bias_velocity(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (const auto* conv = std::get_if<Conv2d>(&layers[i])) {
            weight_velocity[i] = Tensor::zeros_like(conv->weights);
            bias_velocity[i] = Tensor::zeros_like(conv->bias);
        } else if (const auto* linear = std::get_if<Linear>(&layers[i])) {
            weight_velocity[i] = Tensor::zeros_like(linear->weights);
            bias_velocity[i] = Tensor::zeros_like(linear->bias);
        }
    }

    Rng rng(mix_seed(options.seed, 0x5eed));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t stop = std::min(order.size(), start + options.batch_size);
            std::vector<Tensor> weight_sum(layers.size());
            std::vector<Tensor> bias_sum(layers.size());
            for (std::size_t b = start; b < stop; ++b) {
                const LabeledImage& sample = data[order[b]];
                LossGradients grads = full_gradients(model, sample.pixels, sample.label);
                for (std::size_t i = 0; i < layers.size(); ++i) {
                    if (grads.parameters.weights[i].empty()) continue;
                    if (weight_sum[i].empty()) {
                        weight_sum[i] = std::move(grads.parameters.weights[i]);
                        bias_sum[i] = std::move(grads.parameters.biases[i]);
                    } else {
                        add_scaled(weight_sum[i], 1.0, grads.parameters.weights[i]);
                        add_scaled(bias_sum[i], 1.0, grads.parameters.biases[i]);
                    }
                }
            }
            const double step = options.learning_rate / static_cast<double>(stop - start);
            for (std::size_t i = 0; i < layers.size(); ++i) {
                if (weight_sum[i].empty()) continue;
                Tensor& vw = weight_velocity[i];
                Tensor& vb = bias_velocity[i];
                for (std::size_t j = 0; j < vw.size(); ++j) vw[j] = options.momentum * vw[j] - step * weight_sum[i][j];
                for (std::size_t j = 0; j < vb.size(); ++j) vb[j] = options.momentum * vb[j] - step * bias_sum[i][j];
                std::visit(Overloaded{[&](Conv2d& c) {
                                          add_scaled(c.weights, 1.0, vw);
                                          add_scaled(c.bias, 1.0, vb);
                                      },
                                      [&](Linear& l) {
                                          add_scaled(l.weights, 1.0, vw);
                                          add_scaled(l.bias, 1.0, vb);
                                      },
                                      [](auto&) {}},
                           layers[i]);
            }
        }
        for (const Layer& layer : layers) {
            std::visit(Overloaded{[](const Conv2d& c) { require_finite(c.weights, "train"); },
                                  [](const Linear& l) { require_finite(l.weights, "train"); }, [](const auto&) {}},
                       layer);
        }
        if (options.on_epoch) options.on_epoch(epoch, model);
    }
    return model;
}

double accuracy(const Classifier& model, std::span<const LabeledImage> data) {
    if (data.empty()) return 0.0;
    std::size_t correct = 0;
    for (const LabeledImage& image : data) {
        if (predict(model, image.pixels) == image.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_loss(const Classifier& model, std::span<const LabeledImage> data) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (const LabeledImage& image : data) total += cross_entropy(forward(model, image.pixels), image.label);
    return total / static_cast<double>(data.size());
}

} // namespace fsa
