#pragma once

#include "fsa/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace fsa {

struct ConvSpec {
    std::size_t filters = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
};

struct LinearSpec {
    std::size_t outputs = 0;
};

using LayerSpec = std::variant<ConvSpec, LinearSpec, ReLU, MaxPool2d, Flatten>;

/// Layer structure without parameters.
struct ArchitectureSpec {
    Shape input_shape;
    std::vector<LayerSpec> layers;
};

/// 784 -> 128 -> ReLU -> classes.
ArchitectureSpec mlp_architecture(Shape input_shape = {1, 28, 28}, std::size_t classes = 10);

/// conv3x3x16 -> ReLU -> pool2 -> conv3x3x32 -> ReLU -> pool2 -> linear, with
/// "same" padding on both convolutions.
ArchitectureSpec cnn_architecture(Shape input_shape = {1, 28, 28}, std::size_t classes = 10);

std::optional<ArchitectureSpec> architecture_by_name(std::string_view name);

/// He-uniform weights, zero biases.
Classifier initialize(const ArchitectureSpec& arch, std::uint64_t seed);

struct TrainOptions {
    std::size_t epochs = 5;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    /// Called after every epoch with the 1-based epoch number.
    std::function<void(std::size_t, const Classifier&)> on_epoch;
};

/// Mini-batch SGD with momentum on softmax cross-entropy. Single-threaded and
/// bit-reproducible for a fixed seed.
Classifier train(const ArchitectureSpec& arch, std::span<const LabeledImage> data, const TrainOptions& options);

double accuracy(const Classifier& model, std::span<const LabeledImage> data);
double mean_loss(const Classifier& model, std::span<const LabeledImage> data);

} // namespace fsa
