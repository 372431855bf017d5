#pragma once

#include <span>
#include <vector>

#include "dnr/nn/tensor.hpp"
#include "dnr/tomo.hpp"

namespace dnr::nn {

struct AdamState {
    long step = 0;
    std::vector<double> m;
    std::vector<double> v;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update of a flat parameter vector. Moments are sized on first use.
template <typename T>
void adam_step(AdamState& state, std::span<T> params, std::span<const T> grads);

/// Applies one Adam update over all trainable tensors, treated as one
/// concatenated parameter vector in visit order.
template <typename T>
void adam_step(AdamState& state, const std::vector<ParamRef<T>>& params);

/// Mean squared error over all elements and its gradient 2 (pred - truth) / count.
template <typename T>
T mse_loss(std::span<const T> pred, std::span<const T> truth, std::span<T> grad);

struct MseResult {
    double loss = 0.0;
    Image grad;
};

MseResult mse_loss(const Image& pred, const Image& truth);

}  // namespace dnr::nn
