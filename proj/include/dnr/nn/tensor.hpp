#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dnr/errors.hpp"

namespace dnr::nn {

enum class Mode { train, eval };

/// Dense (batch, channels, height, width) tensor, row-major.
template <typename T>
struct Tensor4 {
    int b = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(int batch, int channels, int height, int width, T value = T(0));

    size_t size() const { return data.size(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }
    size_t sample_size() const { return static_cast<size_t>(c) * plane(); }

    T& at(int n, int ch, int y, int x) {
        return data[((static_cast<size_t>(n) * c + ch) * h + y) * w + x];
    }
    T at(int n, int ch, int y, int x) const {
        return data[((static_cast<size_t>(n) * c + ch) * h + y) * w + x];
    }

    std::span<T> sample(int n) { return {data.data() + n * sample_size(), sample_size()}; }
    std::span<const T> sample(int n) const { return {data.data() + n * sample_size(), sample_size()}; }

    bool same_shape(const Tensor4& o) const { return b == o.b && c == o.c && h == o.h && w == o.w; }
    std::string shape_string() const;
};

template <typename T>
void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b, const char* where);

/// Named view over one parameter tensor. `grad` is empty for non-trainable buffers
/// such as batch-norm running statistics.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<int> shape;
    std::span<T> value;
    std::span<T> grad;

    bool trainable() const { return !grad.empty(); }
};

template <typename T>
using ParamVisitor = std::function<void(ParamRef<T>)>;

extern template struct Tensor4<float>;
extern template struct Tensor4<double>;

}  // namespace dnr::nn
