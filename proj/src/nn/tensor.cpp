#include "dnr/nn/tensor.hpp"

namespace dnr::nn {

template <typename T>
Tensor4<T>::Tensor4(int batch, int channels, int height, int width, T value)
    : b(batch), c(channels), h(height), w(width) {
    if (batch < 1 || channels < 1 || height < 1 || width < 1)
        throw DimensionError("tensor dimensions must be positive");
    data.assign(static_cast<size_t>(batch) * channels * height * width, value);
}

template <typename T>
std::string Tensor4<T>::shape_string() const {
    return "(" + std::to_string(b) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
}

template <typename T>
void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b, const char* where) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(where) + ": shape " + a.shape_string() + " vs " + b.shape_string());
}

template struct Tensor4<float>;
template struct Tensor4<double>;
template void require_same_shape(const Tensor4<float>&, const Tensor4<float>&, const char*);
template void require_same_shape(const Tensor4<double>&, const Tensor4<double>&, const char*);

}  // namespace dnr::nn
