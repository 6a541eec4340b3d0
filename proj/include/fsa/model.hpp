#pragma once

#include "fsa/tensor.hpp"

#include <cstddef>
#include <variant>
#include <vector>

namespace fsa {

struct Conv2d {
    Tensor weights; // [K,C,kh,kw]
    Tensor bias;    // [K]
    std::size_t stride = 1;
    std::size_t padding = 0;
};

struct Linear {
    Tensor weights; // [out,in]
    Tensor bias;    // [out]
};

struct ReLU {};

/// Non-overlapping max pooling with a size x size window (floor on extents).
struct MaxPool2d {
    std::size_t size = 2;
};

struct Flatten {};

using Layer = std::variant<Conv2d, Linear, ReLU, MaxPool2d, Flatten>;

/// A feed-forward classifier producing raw logits.
///
/// The constructor propagates shapes through the layer list and throws
/// ShapeError if any layer does not accept its predecessor's output or if the
/// final output is not a vector.
class Classifier {
public:
    Classifier(Shape input_shape, std::vector<Layer> layers);

    const Shape& input_shape() const noexcept { return input_shape_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::size_t num_classes() const noexcept { return output_shapes_.back()[0]; }

    /// Shape of the input to layer i; index layers().size() is the logits shape.
    const Shape& activation_shape(std::size_t i) const {
        return i == 0 ? input_shape_ : output_shapes_.at(i - 1);
    }

    /// Mutable access for optimizers; the caller must keep tensor shapes.
    std::vector<Layer>& mutable_layers() noexcept { return layers_; }

private:
    Shape input_shape_;
    std::vector<Layer> layers_;
    std::vector<Shape> output_shapes_;
};

struct LabeledImage {
    Tensor pixels; // [C,H,W] in [0,1]
    std::size_t label = 0;
};

/// Throws ArgumentError if pixels leave [0,1] or the label is not below num_classes.
void validate(const LabeledImage& image, std::size_t num_classes);

Tensor forward(const Classifier& model, const Tensor& x);

Tensor softmax(const Tensor& logits);

/// Softmax cross-entropy, -log softmax(logits)[label].
double cross_entropy(const Tensor& logits, std::size_t label);

/// d cross_entropy(forward(model, x), label) / dx by backpropagation.
Tensor input_gradient(const Classifier& model, const Tensor& x, std::size_t label);

/// Per-layer parameter gradients; entries for parameter-free layers are empty.
struct ParameterGradients {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

struct LossGradients {
    double loss = 0.0;
    Tensor input;
    ParameterGradients parameters;
};

/// Loss plus gradients with respect to the input and every parameter.
LossGradients full_gradients(const Classifier& model, const Tensor& x, std::size_t label);

std::size_t predict(const Classifier& model, const Tensor& x);

} // namespace fsa
