#include "dnr/nn/resnet.hpp"

namespace dnr::nn {

template <typename T>
ResNetOperator<T>::ResNetOperator(int channels, T slope)
    : lift(1, channels), project(channels, 1), channels_(channels), slope_(slope) {
    for (auto& b : blocks) {
        b.conv1 = ConvLayer<T>(channels, channels);
        b.conv2 = ConvLayer<T>(channels, channels);
        b.bn = BatchNormLayer<T>(channels);
    }
}

template <typename T>
void ResNetOperator<T>::init(std::mt19937_64& rng) {
    lift.init_kaiming(rng, slope_);
    for (auto& b : blocks) {
        b.conv1.init_kaiming(rng, slope_);
        b.conv2.init_kaiming(rng, slope_);
    }
    project.init_kaiming(rng, slope_);
}

template <typename T>
void ResNetOperator<T>::set_mode(Mode mode) {
    mode_ = mode;
    for (auto& b : blocks) b.bn.mode = mode;
}

template <typename T>
Tensor4<T> ResNetOperator<T>::forward(const Tensor4<T>& x, ResNetTape<T>* tape) {
    if (x.c != 1) throw DimensionError("ResNet operator expects single-channel input, got " + x.shape_string());
    if (tape) tape->input = x;
    Tensor4<T> h = conv_forward(lift, x);
    for (size_t k = 0; k < blocks.size(); ++k) {
        auto& b = blocks[k];
        Tensor4<T> a1 = conv_forward(b.conv1, h);
        Tensor4<T> z1 = leaky_relu(a1, slope_);
        Tensor4<T> a2 = conv_forward(b.conv2, z1);
        Tensor4<T> s = batchnorm_forward(b.bn, a2);
        for (size_t j = 0; j < s.data.size(); ++j) s.data[j] += h.data[j];
        Tensor4<T> out = leaky_relu(s, slope_);
        if (tape) {
            auto& t = tape->blocks[k];
            t.input = std::move(h);
            t.conv1_out = std::move(a1);
            t.act1 = std::move(z1);
            t.conv2_out = std::move(a2);
            t.sum = std::move(s);
        }
        h = std::move(out);
    }
    Tensor4<T> y = conv_forward(project, h);
    if (tape) tape->project_input = std::move(h);
    return y;
}

template <typename T>
Tensor4<T> ResNetOperator<T>::infer(const Tensor4<T>& x) const {
    if (x.c != 1) throw DimensionError("ResNet operator expects single-channel input, got " + x.shape_string());
    Tensor4<T> h = conv_forward(lift, x);
    for (const auto& b : blocks) {
        Tensor4<T> s = batchnorm_infer(b.bn, conv_forward(b.conv2, leaky_relu(conv_forward(b.conv1, h), slope_)));
        for (size_t j = 0; j < s.data.size(); ++j) s.data[j] += h.data[j];
        h = leaky_relu(s, slope_);
    }
    return conv_forward(project, h);
}

namespace {

template <typename T>
void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
    for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

}  // namespace

template <typename T>
Tensor4<T> ResNetOperator<T>::backward(const ResNetTape<T>& tape, const Tensor4<T>& grad_out) {
    auto gp = conv_backward(project, tape.project_input, grad_out);
    accumulate(project.grad_weight, gp.grad_weight);
    accumulate(project.grad_bias, gp.grad_bias);
    Tensor4<T> g = std::move(gp.grad_x);

    for (int k = static_cast<int>(blocks.size()) - 1; k >= 0; --k) {
        auto& b = blocks[k];
        const auto& t = tape.blocks[k];
        Tensor4<T> gs = leaky_relu_backward(t.sum, g, slope_);
        auto gbn = batchnorm_backward(b.bn, t.conv2_out, gs);
        accumulate(b.bn.grad_gamma, gbn.grad_gamma);
        accumulate(b.bn.grad_beta, gbn.grad_beta);
        auto gc2 = conv_backward(b.conv2, t.act1, gbn.grad_x);
        accumulate(b.conv2.grad_weight, gc2.grad_weight);
        accumulate(b.conv2.grad_bias, gc2.grad_bias);
        Tensor4<T> ga1 = leaky_relu_backward(t.conv1_out, gc2.grad_x, slope_);
        auto gc1 = conv_backward(b.conv1, t.input, ga1);
        accumulate(b.conv1.grad_weight, gc1.grad_weight);
        accumulate(b.conv1.grad_bias, gc1.grad_bias);
        // Skip connection: gradient reaches the block input directly and through conv1.
        for (size_t j = 0; j < gs.data.size(); ++j) gs.data[j] += gc1.grad_x.data[j];
        g = std::move(gs);
    }

    auto gl = conv_backward(lift, tape.input, g);
    accumulate(lift.grad_weight, gl.grad_weight);
    accumulate(lift.grad_bias, gl.grad_bias);
    return std::move(gl.grad_x);
}

template <typename T>
void ResNetOperator<T>::zero_grad() {
    lift.zero_grad();
    for (auto& b : blocks) {
        b.conv1.zero_grad();
        b.conv2.zero_grad();
        b.bn.zero_grad();
    }
    project.zero_grad();
}

template <typename T>
void ResNetOperator<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    lift.visit(prefix + ".lift", fn);
    for (size_t k = 0; k < blocks.size(); ++k) {
        const std::string p = prefix + ".res" + std::to_string(k);
        blocks[k].conv1.visit(p + ".conv1", fn);
        blocks[k].conv2.visit(p + ".conv2", fn);
        blocks[k].bn.visit(p + ".bn", fn);
    }
    project.visit(prefix + ".project", fn);
}

template class ResNetOperator<float>;
template class ResNetOperator<double>;

}  // namespace dnr::nn
