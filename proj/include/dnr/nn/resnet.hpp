#pragma once

#include <array>
#include <random>
#include <span>
#include <string>

#include "dnr/nn/layers.hpp"

namespace dnr::nn {

/// conv1 -> LeakyReLU -> conv2 -> BN -> add skip -> LeakyReLU
template <typename T>
struct ResidualBlock {
    ConvLayer<T> conv1;
    ConvLayer<T> conv2;
    BatchNormLayer<T> bn;
};

/// Forward intermediates kept for backpropagation.
template <typename T>
struct ResNetTape {
    Tensor4<T> input;
    struct Block {
        Tensor4<T> input;
        Tensor4<T> conv1_out;
        Tensor4<T> act1;
        Tensor4<T> conv2_out;
        Tensor4<T> sum;
    };
    std::array<Block, 2> blocks;
    Tensor4<T> project_input;
};

/// Single-channel image operator: lift (1 -> C), two residual blocks, project (C -> 1).
template <typename T>
class ResNetOperator {
public:
    ResNetOperator() = default;
    ResNetOperator(int channels, T slope = T(0.01));

    void init(std::mt19937_64& rng);
    void set_mode(Mode mode);
    Mode mode() const { return mode_; }

    /// Forward pass; records intermediates in `tape` when given. Train mode
    /// updates batch-norm running statistics.
    Tensor4<T> forward(const Tensor4<T>& x, ResNetTape<T>* tape = nullptr);

    /// Eval-mode forward that leaves the operator untouched.
    Tensor4<T> infer(const Tensor4<T>& x) const;

    /// Backpropagates through the recorded pass; accumulates parameter gradients
    /// and returns the input gradient.
    Tensor4<T> backward(const ResNetTape<T>& tape, const Tensor4<T>& grad_out);

    void zero_grad();
    void visit(const std::string& prefix, const ParamVisitor<T>& fn);

    int channels() const { return channels_; }
    T slope() const { return slope_; }

    ConvLayer<T> lift;
    std::array<ResidualBlock<T>, 2> blocks;
    ConvLayer<T> project;

    /// Tensors per operator in checkpoints: lift (2) + 2 x (2 convs x 2 + BN 4) + project (2).
    static constexpr int tensor_count = 20;

private:
    int channels_ = 0;
    T slope_ = T(0.01);
    Mode mode_ = Mode::train;
};

}  // namespace dnr::nn
