#include "dnr/nn/adam.hpp"

#include <cmath>

namespace dnr::nn {

namespace {

template <typename T>
void update(AdamState& s, size_t offset, std::span<T> params, std::span<const T> grads, double c1, double c2) {
    for (size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        double& m = s.m[offset + k];
        double& v = s.v[offset + k];
        m = s.beta1 * m + (1.0 - s.beta1) * g;
        v = s.beta2 * v + (1.0 - s.beta2) * g * g;
        const double mhat = m / c1;
        const double vhat = v / c2;
        params[k] = static_cast<T>(params[k] - s.lr * mhat / (std::sqrt(vhat) + s.eps));
    }
}

}  // namespace

template <typename T>
void adam_step(AdamState& state, std::span<T> params, std::span<const T> grads) {
    if (params.size() != grads.size()) throw DimensionError("adam: parameter and gradient sizes differ");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw DimensionError("adam: state size differs from parameters");
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    update(state, 0, params, grads, c1, c2);
}

template <typename T>
void adam_step(AdamState& state, const std::vector<ParamRef<T>>& params) {
    size_t total = 0;
    for (const auto& p : params) {
        if (!p.trainable()) continue;
        if (p.grad.size() != p.value.size()) throw DimensionError("adam: gradient size differs for " + p.name);
        total += p.value.size();
    }
    if (state.m.empty()) {
        state.m.assign(total, 0.0);
        state.v.assign(total, 0.0);
    }
    if (state.m.size() != total) throw DimensionError("adam: state size differs from parameters");
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    size_t offset = 0;
    for (const auto& p : params) {
        if (!p.trainable()) continue;
        update(state, offset, p.value, std::span<const T>(p.grad), c1, c2);
        offset += p.value.size();
    }
}

template <typename T>
T mse_loss(std::span<const T> pred, std::span<const T> truth, std::span<T> grad) {
    if (pred.size() != truth.size() || grad.size() != pred.size())
        throw DimensionError("mse: size mismatch");
    const double count = static_cast<double>(pred.size());
    double acc = 0.0;
    for (size_t k = 0; k < pred.size(); ++k) {
        const double d = static_cast<double>(pred[k]) - static_cast<double>(truth[k]);
        acc += d * d;
        grad[k] = static_cast<T>(2.0 * d / count);
    }
    return static_cast<T>(acc / count);
}

MseResult mse_loss(const Image& pred, const Image& truth) {
    if (pred.n != truth.n || pred.data.size() != truth.data.size())
        throw DimensionError("mse: image shapes differ");
    MseResult r{0.0, Image(pred.n, 0.0, pred.pixel_size)};
    r.loss = mse_loss<double>(pred.data, truth.data, r.grad.data);
    return r;
}

template void adam_step(AdamState&, std::span<float>, std::span<const float>);
template void adam_step(AdamState&, std::span<double>, std::span<const double>);
template void adam_step(AdamState&, const std::vector<ParamRef<float>>&);
template void adam_step(AdamState&, const std::vector<ParamRef<double>>&);
template float mse_loss(std::span<const float>, std::span<const float>, std::span<float>);
template double mse_loss(std::span<const double>, std::span<const double>, std::span<double>);

}  // namespace dnr::nn
