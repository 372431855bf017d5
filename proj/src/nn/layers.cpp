#define EIGEN_DONT_PARALLELIZE
#include "dnr/nn/layers.hpp"

#include <cmath>

#include <Eigen/Core>

namespace dnr::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// Unfolds one sample into (in * 9) x (h * w) patch columns.
template <typename T>
void im2col(const T* src, int channels, int h, int w, T* cols) {
    const size_t hw = static_cast<size_t>(h) * w;
    for (int ci = 0; ci < channels; ++ci) {
        const T* plane = src + ci * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = cols + (static_cast<size_t>(ci) * 9 + ky * 3 + kx) * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - 1;
                    T* dst = row + static_cast<size_t>(y) * w;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst, dst + w, T(0));
                        continue;
                    }
                    const T* s = plane + static_cast<size_t>(sy) * w;
                    for (int x = 0; x < w; ++x) {
                        const int sx = x + kx - 1;
                        dst[x] = (sx >= 0 && sx < w) ? s[sx] : T(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters patch columns back onto the image.
template <typename T>
void col2im(const T* cols, int channels, int h, int w, T* dst) {
    const size_t hw = static_cast<size_t>(h) * w;
    std::fill(dst, dst + channels * hw, T(0));
    for (int ci = 0; ci < channels; ++ci) {
        T* plane = dst + ci * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = cols + (static_cast<size_t>(ci) * 9 + ky * 3 + kx) * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    const T* s = row + static_cast<size_t>(y) * w;
                    T* d = plane + static_cast<size_t>(sy) * w;
                    for (int x = 0; x < w; ++x) {
                        const int sx = x + kx - 1;
                        if (sx >= 0 && sx < w) d[sx] += s[x];
                    }
                }
            }
        }
    }
}

template <typename T>
void check_conv_input(const ConvLayer<T>& layer, const Tensor4<T>& x) {
    if (x.c != layer.in_channels)
        throw DimensionError("conv: input has " + std::to_string(x.c) + " channels, layer expects " +
                             std::to_string(layer.in_channels));
}

}  // namespace

template <typename T>
ConvLayer<T>::ConvLayer(int in, int out) : in_channels(in), out_channels(out) {
    if (in < 1 || out < 1) throw DimensionError("conv channel counts must be positive");
    weight.assign(static_cast<size_t>(out) * in * 9, T(0));
    bias.assign(out, T(0));
    grad_weight.assign(weight.size(), T(0));
    grad_bias.assign(bias.size(), T(0));
}

template <typename T>
void ConvLayer<T>::init_kaiming(std::mt19937_64& rng, double slope) {
    const double fan_in = 9.0 * in_channels;
    const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * fan_in));
    for (auto& w : weight) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        w = static_cast<T>((2.0 * u - 1.0) * bound);
    }
    std::fill(bias.begin(), bias.end(), T(0));
}

template <typename T>
void ConvLayer<T>::zero_grad() {
    std::fill(grad_weight.begin(), grad_weight.end(), T(0));
    std::fill(grad_bias.begin(), grad_bias.end(), T(0));
}

template <typename T>
void ConvLayer<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn({prefix + ".weight", {out_channels, in_channels, 3, 3}, weight, grad_weight});
    fn({prefix + ".bias", {out_channels}, bias, grad_bias});
}

template <typename T>
Tensor4<T> conv_forward(const ConvLayer<T>& layer, const Tensor4<T>& x) {
    check_conv_input(layer, x);
    Tensor4<T> out(x.b, layer.out_channels, x.h, x.w);
    const int hw = x.h * x.w;
    const int k = layer.in_channels * 9;
    ConstMatMap<T> W(layer.weight.data(), layer.out_channels, k);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(layer.bias.data(), layer.out_channels);

#pragma omp parallel
    {
        std::vector<T> cols(static_cast<size_t>(k) * hw);
#pragma omp for schedule(static)
        for (int n = 0; n < x.b; ++n) {
            im2col(x.sample(n).data(), x.c, x.h, x.w, cols.data());
            MatMap<T> Y(out.sample(n).data(), layer.out_channels, hw);
            Y.noalias() = W * ConstMatMap<T>(cols.data(), k, hw);
            Y.colwise() += bias;
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv_backward(const ConvLayer<T>& layer, const Tensor4<T>& x, const Tensor4<T>& grad_out) {
    check_conv_input(layer, x);
    if (grad_out.b != x.b || grad_out.c != layer.out_channels || grad_out.h != x.h || grad_out.w != x.w)
        throw DimensionError("conv backward: gradient shape " + grad_out.shape_string() +
                             " does not match forward output");
    const int hw = x.h * x.w;
    const int k = layer.in_channels * 9;
    ConvGrads<T> g{Tensor4<T>(x.b, x.c, x.h, x.w), std::vector<T>(layer.weight.size(), T(0)),
                   std::vector<T>(layer.bias.size(), T(0))};
    ConstMatMap<T> W(layer.weight.data(), layer.out_channels, k);

    // Per-sample weight gradients are reduced in sample order for determinism.
    std::vector<RowMatrix<T>> per_sample(x.b);
#pragma omp parallel
    {
        std::vector<T> cols(static_cast<size_t>(k) * hw);
        std::vector<T> grad_cols(static_cast<size_t>(k) * hw);
#pragma omp for schedule(static)
        for (int n = 0; n < x.b; ++n) {
            im2col(x.sample(n).data(), x.c, x.h, x.w, cols.data());
            ConstMatMap<T> G(grad_out.sample(n).data(), layer.out_channels, hw);
            ConstMatMap<T> C(cols.data(), k, hw);
            per_sample[n].noalias() = G * C.transpose();
            MatMap<T>(grad_cols.data(), k, hw).noalias() = W.transpose() * G;
            col2im(grad_cols.data(), x.c, x.h, x.w, g.grad_x.sample(n).data());
        }
    }
    MatMap<T> gW(g.grad_weight.data(), layer.out_channels, k);
    for (int n = 0; n < x.b; ++n) {
        gW += per_sample[n];
        for (int o = 0; o < layer.out_channels; ++o) {
            const T* row = grad_out.data.data() + (static_cast<size_t>(n) * layer.out_channels + o) * hw;
            T acc = 0;
            for (int p = 0; p < hw; ++p) acc += row[p];
            g.grad_bias[o] += acc;
        }
    }
    return g;
}

template <typename T>
BatchNormLayer<T>::BatchNormLayer(int ch)
    : channels(ch),
      gamma(ch, T(1)),
      beta(ch, T(0)),
      running_mean(ch, T(0)),
      running_var(ch, T(1)),
      grad_gamma(ch, T(0)),
      grad_beta(ch, T(0)) {
    if (ch < 1) throw DimensionError("batch norm needs at least one channel");
}

template <typename T>
void BatchNormLayer<T>::zero_grad() {
    std::fill(grad_gamma.begin(), grad_gamma.end(), T(0));
    std::fill(grad_beta.begin(), grad_beta.end(), T(0));
}

template <typename T>
void BatchNormLayer<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn({prefix + ".gamma", {channels}, gamma, grad_gamma});
    fn({prefix + ".beta", {channels}, beta, grad_beta});
    fn({prefix + ".running_mean", {channels}, running_mean, {}});
    fn({prefix + ".running_var", {channels}, running_var, {}});
}

namespace {

template <typename T>
void check_bn_input(const BatchNormLayer<T>& layer, const Tensor4<T>& x) {
    if (x.c != layer.channels)
        throw DimensionError("batch norm: input has " + std::to_string(x.c) + " channels, layer has " +
                             std::to_string(layer.channels));
}

template <typename T>
void check_running_stats(const BatchNormLayer<T>& layer) {
    for (T v : layer.running_var) {
        if (!(v > T(0))) throw DomainError("batch norm: running variance is uninitialised (zero)");
    }
}

// Per-channel biased batch mean and variance, accumulated in double.
template <typename T>
void batch_stats(const Tensor4<T>& x, int ch, double& mean, double& var) {
    const size_t hw = x.plane();
    const double count = static_cast<double>(x.b) * static_cast<double>(hw);
    double s = 0.0;
    for (int n = 0; n < x.b; ++n) {
        const T* p = x.data.data() + (static_cast<size_t>(n) * x.c + ch) * hw;
        for (size_t k = 0; k < hw; ++k) s += p[k];
    }
    mean = s / count;
    double q = 0.0;
    for (int n = 0; n < x.b; ++n) {
        const T* p = x.data.data() + (static_cast<size_t>(n) * x.c + ch) * hw;
        for (size_t k = 0; k < hw; ++k) {
            const double d = p[k] - mean;
            q += d * d;
        }
    }
    var = q / count;
}

template <typename T>
Tensor4<T> normalise(const BatchNormLayer<T>& layer, const Tensor4<T>& x, const std::vector<double>& mean,
                     const std::vector<double>& var) {
    Tensor4<T> out(x.b, x.c, x.h, x.w);
    const size_t hw = x.plane();
    for (int ch = 0; ch < x.c; ++ch) {
        const double inv = 1.0 / std::sqrt(var[ch] + layer.eps);
        const double scale = layer.gamma[ch] * inv;
        const double shift = layer.beta[ch] - mean[ch] * scale;
        for (int n = 0; n < x.b; ++n) {
            const size_t off = (static_cast<size_t>(n) * x.c + ch) * hw;
            for (size_t k = 0; k < hw; ++k) out.data[off + k] = static_cast<T>(x.data[off + k] * scale + shift);
        }
    }
    return out;
}

}  // namespace

template <typename T>
Tensor4<T> batchnorm_forward(BatchNormLayer<T>& layer, const Tensor4<T>& x) {
    check_bn_input(layer, x);
    if (layer.mode == Mode::eval) return batchnorm_infer(layer, x);
    if (static_cast<size_t>(x.b) * x.plane() < 2)
        throw DimensionError("batch norm: train mode needs at least 2 values per channel");
    std::vector<double> mean(x.c), var(x.c);
    for (int ch = 0; ch < x.c; ++ch) {
        batch_stats(x, ch, mean[ch], var[ch]);
        layer.running_mean[ch] =
            static_cast<T>(layer.momentum * layer.running_mean[ch] + (1.0 - layer.momentum) * mean[ch]);
        layer.running_var[ch] =
            static_cast<T>(layer.momentum * layer.running_var[ch] + (1.0 - layer.momentum) * var[ch]);
    }
    return normalise(layer, x, mean, var);
}

template <typename T>
Tensor4<T> batchnorm_infer(const BatchNormLayer<T>& layer, const Tensor4<T>& x) {
    check_bn_input(layer, x);
    check_running_stats(layer);
    std::vector<double> mean(layer.running_mean.begin(), layer.running_mean.end());
    std::vector<double> var(layer.running_var.begin(), layer.running_var.end());
    return normalise(layer, x, mean, var);
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormLayer<T>& layer, const Tensor4<T>& x,
                                     const Tensor4<T>& grad_out) {
    check_bn_input(layer, x);
    require_same_shape(x, grad_out, "batch norm backward");
    BatchNormGrads<T> g{Tensor4<T>(x.b, x.c, x.h, x.w), std::vector<T>(x.c, T(0)), std::vector<T>(x.c, T(0))};
    const size_t hw = x.plane();
    const double count = static_cast<double>(x.b) * static_cast<double>(hw);
    if (layer.mode == Mode::eval) check_running_stats(layer);

    for (int ch = 0; ch < x.c; ++ch) {
        double mean = 0.0;
        double var = 0.0;
        if (layer.mode == Mode::train) {
            batch_stats(x, ch, mean, var);
        } else {
            mean = layer.running_mean[ch];
            var = layer.running_var[ch];
        }
        const double inv = 1.0 / std::sqrt(var + layer.eps);
        double sum_g = 0.0;
        double sum_gx = 0.0;
        for (int n = 0; n < x.b; ++n) {
            const size_t off = (static_cast<size_t>(n) * x.c + ch) * hw;
            for (size_t k = 0; k < hw; ++k) {
                const double xh = (x.data[off + k] - mean) * inv;
                sum_g += grad_out.data[off + k];
                sum_gx += grad_out.data[off + k] * xh;
            }
        }
        g.grad_beta[ch] = static_cast<T>(sum_g);
        g.grad_gamma[ch] = static_cast<T>(sum_gx);
        const double scale = layer.gamma[ch] * inv;
        for (int n = 0; n < x.b; ++n) {
            const size_t off = (static_cast<size_t>(n) * x.c + ch) * hw;
            for (size_t k = 0; k < hw; ++k) {
                const double go = grad_out.data[off + k];
                if (layer.mode == Mode::train) {
                    const double xh = (x.data[off + k] - mean) * inv;
                    g.grad_x.data[off + k] = static_cast<T>(scale * (go - sum_g / count - xh * sum_gx / count));
                } else {
                    g.grad_x.data[off + k] = static_cast<T>(scale * go);
                }
            }
        }
    }
    return g;
}

template <typename T>
Tensor4<T> leaky_relu(const Tensor4<T>& x, T slope) {
    Tensor4<T> out = x;
    for (auto& v : out.data) v = v > T(0) ? v : slope * v;
    return out;
}

template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_out, T slope) {
    require_same_shape(x, grad_out, "leaky relu backward");
    Tensor4<T> g = grad_out;
    for (size_t k = 0; k < g.data.size(); ++k) {
        if (!(x.data[k] > T(0))) g.data[k] *= slope;
    }
    return g;
}

#define DNR_INSTANTIATE_LAYERS(T)                                                                       \
    template struct ConvLayer<T>;                                                                       \
    template struct BatchNormLayer<T>;                                                                  \
    template Tensor4<T> conv_forward(const ConvLayer<T>&, const Tensor4<T>&);                           \
    template ConvGrads<T> conv_backward(const ConvLayer<T>&, const Tensor4<T>&, const Tensor4<T>&);     \
    template Tensor4<T> batchnorm_forward(BatchNormLayer<T>&, const Tensor4<T>&);                       \
    template Tensor4<T> batchnorm_infer(const BatchNormLayer<T>&, const Tensor4<T>&);                   \
    template BatchNormGrads<T> batchnorm_backward(const BatchNormLayer<T>&, const Tensor4<T>&,          \
                                                  const Tensor4<T>&);                                   \
    template Tensor4<T> leaky_relu(const Tensor4<T>&, T);                                               \
    template Tensor4<T> leaky_relu_backward(const Tensor4<T>&, const Tensor4<T>&, T);

DNR_INSTANTIATE_LAYERS(float)
DNR_INSTANTIATE_LAYERS(double)

}  // namespace dnr::nn
