#include "fsa/model.hpp"

#include "fsa/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fsa {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string layer_error(std::size_t index, const std::string& what) {
    return "layer " + std::to_string(index) + ": " + what;
}

Shape output_shape(const Layer& layer, const Shape& in, std::size_t index) {
    return std::visit(
        Overloaded{
            [&](const Conv2d& conv) -> Shape {
                const Shape& w = conv.weights.shape();
                if (w.size() != 4) throw ShapeError(layer_error(index, "conv weights must be [K,C,kh,kw]"));
                if (in.size() != 3 || in[0] != w[1]) {
                    throw ShapeError(layer_error(index, "conv weights " + to_string(w) + " do not accept input " +
                                                            to_string(in)));
                }
                if (conv.bias.shape() != Shape{w[0]}) {
                    throw ShapeError(layer_error(index, "conv bias " + to_string(conv.bias.shape()) +
                                                            " does not match " + std::to_string(w[0]) + " filters"));
                }
                return {w[0], conv_output_extent(in[1], w[2], conv.stride, conv.padding),
                        conv_output_extent(in[2], w[3], conv.stride, conv.padding)};
            },
            [&](const Linear& linear) -> Shape {
                const Shape& w = linear.weights.shape();
                if (w.size() != 2) throw ShapeError(layer_error(index, "linear weights must be [out,in]"));
                if (in.size() != 1 || in[0] != w[1]) {
                    throw ShapeError(layer_error(index, "linear weights " + to_string(w) + " do not accept input " +
                                                            to_string(in)));
                }
                if (linear.bias.shape() != Shape{w[0]}) {
                    throw ShapeError(layer_error(index, "linear bias " + to_string(linear.bias.shape()) +
                                                            " does not match " + std::to_string(w[0]) + " outputs"));
                }
                return {w[0]};
            },
            [&](const ReLU&) -> Shape { return in; },
            [&](const MaxPool2d& pool) -> Shape {
                if (pool.size == 0) throw ShapeError(layer_error(index, "pool size must be positive"));
                if (in.size() != 3 || in[1] < pool.size || in[2] < pool.size) {
                    throw ShapeError(layer_error(index, "max pool " + std::to_string(pool.size) +
                                                            " does not accept input " + to_string(in)));
                }
                return {in[0], in[1] / pool.size, in[2] / pool.size};
            },
            [&](const Flatten&) -> Shape { return {element_count(in)}; },
        },
        layer);
}

Tensor conv_forward(const Conv2d& conv, const Tensor& x) {
    Tensor out = conv2d(x, conv.weights, conv.stride, conv.padding);
    const std::size_t plane = out.dim(1) * out.dim(2);
    for (std::size_t k = 0; k < out.dim(0); ++k) {
        const double b = conv.bias[k];
        double* p = out.data() + k * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
    return out;
}

Tensor linear_forward(const Linear& linear, const Tensor& x) {
    const auto out_n = static_cast<Eigen::Index>(linear.weights.dim(0));
    const auto in_n = static_cast<Eigen::Index>(linear.weights.dim(1));
    Tensor out = linear.bias;
    VectorMap(out.data(), out_n).noalias() +=
        ConstMatrixMap(linear.weights.data(), out_n, in_n) * ConstVectorMap(x.data(), in_n);
    return out;
}

Tensor maxpool_forward(const MaxPool2d& pool, const Tensor& x, std::vector<std::size_t>* winners) {
    const std::size_t k = pool.size;
    Tensor out({x.dim(0), x.dim(1) / k, x.dim(2) / k});
    if (winners) winners->assign(out.size(), 0);
    std::size_t o = 0;
    for (std::size_t c = 0; c < out.dim(0); ++c) {
        for (std::size_t oy = 0; oy < out.dim(1); ++oy) {
            for (std::size_t ox = 0; ox < out.dim(2); ++ox, ++o) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_index = 0;
                for (std::size_t dy = 0; dy < k; ++dy) {
                    for (std::size_t dx = 0; dx < k; ++dx) {
                        const std::size_t index = (c * x.dim(1) + oy * k + dy) * x.dim(2) + ox * k + dx;
                        if (x[index] > best) {
                            best = x[index];
                            best_index = index;
                        }
                    }
                }
                out[o] = best;
                if (winners) (*winners)[o] = best_index;
            }
        }
    }
    return out;
}

// Inputs to every layer plus pooling winners, kept for the backward pass.
struct Trace {
    std::vector<Tensor> inputs;
    std::vector<std::vector<std::size_t>> winners;
    Tensor logits;
};

Trace run_forward(const Classifier& model, const Tensor& x, bool keep) {
    if (x.shape() != model.input_shape()) {
        throw ShapeError("classifier expects input " + to_string(model.input_shape()) + ", got " +
                         to_string(x.shape()));
    }
    Trace trace;
    const auto& layers = model.layers();
    if (keep) {
        trace.inputs.reserve(layers.size());
        trace.winners.resize(layers.size());
    }
    Tensor current = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Tensor next = std::visit(
            Overloaded{
                [&](const Conv2d& conv) { return conv_forward(conv, current); },
                [&](const Linear& linear) { return linear_forward(linear, current); },
                [&](const ReLU&) {
                    Tensor out = current;
                    for (double& v : out.values()) v = std::max(v, 0.0);
                    return out;
                },
                [&](const MaxPool2d& pool) {
                    return maxpool_forward(pool, current, keep ? &trace.winners[i] : nullptr);
                },
                [&](const Flatten&) { return current.reshaped({current.size()}); },
            },
            layers[i]);
        if (keep) trace.inputs.push_back(std::move(current));
        current = std::move(next);
    }
    require_finite(current, "forward");
    trace.logits = std::move(current);
    return trace;
}

Tensor logit_gradient(const Tensor& logits, std::size_t label) {
    Tensor g = softmax(logits);
    g[label] -= 1.0;
    return g;
}

Tensor backward(const Classifier& model, const Trace& trace, Tensor grad, ParameterGradients* params) {
    const auto& layers = model.layers();
    if (params) {
        params->weights.assign(layers.size(), Tensor());
        params->biases.assign(layers.size(), Tensor());
    }
    for (std::size_t i = layers.size(); i-- > 0;) {
        const Tensor& in = trace.inputs[i];
        grad = std::visit(
            Overloaded{
                [&](const Conv2d& conv) {
                    if (params) {
                        params->weights[i] =
                            conv2d_backward_kernel(grad, in, conv.weights.shape(), conv.stride, conv.padding);
                        Tensor db({grad.dim(0)});
                        const std::size_t plane = grad.dim(1) * grad.dim(2);
                        for (std::size_t k = 0; k < grad.dim(0); ++k) {
                            double s = 0.0;
                            for (std::size_t j = 0; j < plane; ++j) s += grad[k * plane + j];
                            db[k] = s;
                        }
                        params->biases[i] = std::move(db);
                    }
                    return conv2d_backward_input(grad, conv.weights, in.shape(), conv.stride, conv.padding);
                },
                [&](const Linear& linear) {
                    const auto out_n = static_cast<Eigen::Index>(linear.weights.dim(0));
                    const auto in_n = static_cast<Eigen::Index>(linear.weights.dim(1));
                    if (params) {
                        Tensor dw(linear.weights.shape());
                        Eigen::Map<RowMatrix>(dw.data(), out_n, in_n).noalias() =
                            ConstVectorMap(grad.data(), out_n) * ConstVectorMap(in.data(), in_n).transpose();
                        params->weights[i] = std::move(dw);
                        params->biases[i] = grad;
                    }
                    Tensor dx(in.shape());
                    VectorMap(dx.data(), in_n).noalias() =
                        ConstMatrixMap(linear.weights.data(), out_n, in_n).transpose() *
                        ConstVectorMap(grad.data(), out_n);
                    return dx;
                },
                [&](const ReLU&) {
                    Tensor dx = grad;
                    for (std::size_t j = 0; j < dx.size(); ++j) {
                        if (!(in[j] > 0.0)) dx[j] = 0.0;
                    }
                    return dx;
                },
                [&](const MaxPool2d&) {
                    Tensor dx(in.shape());
                    const auto& winners = trace.winners[i];
                    for (std::size_t j = 0; j < grad.size(); ++j) dx[winners[j]] += grad[j];
                    return dx;
                },
                [&](const Flatten&) { return std::move(grad).reshaped(in.shape()); },
            },
            layers[i]);
    }
    return grad;
}

} // namespace

Classifier::Classifier(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    if (input_shape_.empty() || element_count(input_shape_) == 0) {
        throw ShapeError("classifier input shape must be non-empty");
    }
    if (layers_.empty()) throw ShapeError("classifier needs at least one layer");
    Shape current = input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        current = output_shape(layers_[i], current, i);
        output_shapes_.push_back(current);
    }
    if (current.size() != 1 || current[0] < 2) {
        throw ShapeError("classifier output must be a vector of at least 2 logits, got " + to_string(current));
    }
}

void validate(const LabeledImage& image, std::size_t num_classes) {
    if (image.label >= num_classes) {
        throw ArgumentError("label " + std::to_string(image.label) + " outside [0," + std::to_string(num_classes) +
                            ")");
    }
    for (double v : image.pixels.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("pixel value outside [0,1]");
    }
}

Tensor forward(const Classifier& model, const Tensor& x) {
    return run_forward(model, x, false).logits;
}

Tensor softmax(const Tensor& logits) {
    require_finite(logits, "softmax");
    const double top = *std::max_element(logits.values().begin(), logits.values().end());
    Tensor out = Tensor::zeros_like(logits);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (double& v : out.values()) v /= total;
    return out;
}

double cross_entropy(const Tensor& logits, std::size_t label) {
    if (logits.rank() != 1) throw ShapeError("cross_entropy expects a logit vector");
    if (label >= logits.size()) {
        throw ArgumentError("label " + std::to_string(label) + " outside [0," + std::to_string(logits.size()) + ")");
    }
    require_finite(logits, "cross_entropy");
    const double top = *std::max_element(logits.values().begin(), logits.values().end());
    double total = 0.0;
    for (double v : logits.values()) total += std::exp(v - top);
    return std::max(0.0, std::log(total) - (logits[label] - top));
}

Tensor input_gradient(const Classifier& model, const Tensor& x, std::size_t label) {
    if (label >= model.num_classes()) throw ArgumentError("label outside classifier range");
    Trace trace = run_forward(model, x, true);
    return backward(model, trace, logit_gradient(trace.logits, label), nullptr);
}

LossGradients full_gradients(const Classifier& model, const Tensor& x, std::size_t label) {
    if (label >= model.num_classes()) throw ArgumentError("label outside classifier range");
    Trace trace = run_forward(model, x, true);
    LossGradients out;
    out.loss = cross_entropy(trace.logits, label);
    out.input = backward(model, trace, logit_gradient(trace.logits, label), &out.parameters);
    return out;
}

std::size_t predict(const Classifier& model, const Tensor& x) {
    return argmax(forward(model, x));
}

} // namespace fsa
