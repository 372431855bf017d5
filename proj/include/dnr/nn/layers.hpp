#pragma once

#include <random>
#include <string>
#include <vector>

#include "dnr/nn/tensor.hpp"

namespace dnr::nn {

/// 3x3 convolution (cross-correlation), stride 1, zero padding 1.
template <typename T>
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<T> weight;  ///< out x in x 3 x 3
    std::vector<T> bias;    ///< out
    std::vector<T> grad_weight;
    std::vector<T> grad_bias;

    ConvLayer() = default;
    ConvLayer(int in, int out);

    /// Kaiming-style uniform init for a leaky-ReLU stack, zero bias.
    void init_kaiming(std::mt19937_64& rng, double slope);
    void zero_grad();
    void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

template <typename T>
struct ConvGrads {
    Tensor4<T> grad_x;
    std::vector<T> grad_weight;
    std::vector<T> grad_bias;
};

template <typename T>
Tensor4<T> conv_forward(const ConvLayer<T>& layer, const Tensor4<T>& x);

/// Exact gradients of conv_forward with respect to input, kernel and bias.
template <typename T>
ConvGrads<T> conv_backward(const ConvLayer<T>& layer, const Tensor4<T>& x, const Tensor4<T>& grad_out);

template <typename T>
struct BatchNormLayer {
    int channels = 0;
    std::vector<T> gamma;
    std::vector<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    std::vector<T> grad_gamma;
    std::vector<T> grad_beta;
    double momentum = 0.9;
    double eps = 1e-5;
    Mode mode = Mode::train;

    BatchNormLayer() = default;
    explicit BatchNormLayer(int ch);

    void zero_grad();
    void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

template <typename T>
struct BatchNormGrads {
    Tensor4<T> grad_x;
    std::vector<T> grad_gamma;
    std::vector<T> grad_beta;
};

/// Train mode normalises with batch statistics and updates the running
/// averages (running <- momentum * running + (1 - momentum) * batch).
/// Eval mode uses the running statistics only.
template <typename T>
Tensor4<T> batchnorm_forward(BatchNormLayer<T>& layer, const Tensor4<T>& x);

/// Eval-mode forward without touching the layer.
template <typename T>
Tensor4<T> batchnorm_infer(const BatchNormLayer<T>& layer, const Tensor4<T>& x);

/// Gradients for the layer's current mode, recomputing batch statistics from x.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormLayer<T>& layer, const Tensor4<T>& x,
                                     const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> leaky_relu(const Tensor4<T>& x, T slope);

template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_out, T slope);

}  // namespace dnr::nn
