#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dnr/tomo.hpp"

namespace dnr::test {

inline Image random_image(int n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Image f(n);
    for (auto& v : f.data) v = u(rng);
    return f;
}

inline Sinogram random_sinogram(int views, int bins, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Sinogram y(views, bins);
    for (auto& v : y.data) v = u(rng);
    return y;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

/// max |a - b| / max |b|, with `floor` guarding an all-zero reference.
template <typename V>
double rel_error(const V& analytic, const V& reference, double floor = 1e-300) {
    double diff = 0.0;
    double scale = 0.0;
    for (size_t i = 0; i < reference.size(); ++i) {
        diff = std::max(diff, std::abs(static_cast<double>(analytic[i]) - static_cast<double>(reference[i])));
        scale = std::max(scale, std::abs(static_cast<double>(reference[i])));
    }
    return diff / std::max(scale, floor);
}

/// Dense system matrix computed independently of the Siddon tracer: every ray
/// is clipped against every pixel square with the slab method.
inline std::vector<std::vector<double>> dense_system_matrix(const Geometry& g) {
    const int n = g.n;
    const double ps = g.pixel_size;
    std::vector<std::vector<double>> M(static_cast<size_t>(g.views) * g.bins,
                                       std::vector<double>(static_cast<size_t>(n) * n, 0.0));
    for (int v = 0; v < g.views; ++v) {
        const double c = std::cos(g.angles[v]);
        const double s = std::sin(g.angles[v]);
        for (int d = 0; d < g.bins; ++d) {
            const double t = (d + 0.5 - g.bins / 2.0) * ps;
            const double px = t * c, py = t * s;  // point on the ray
            const double dx = -s, dy = c;         // ray direction
            for (int r = 0; r < n; ++r) {
                for (int col = 0; col < n; ++col) {
                    const double x0 = (col - n / 2.0) * ps, x1 = x0 + ps;
                    const double y1 = (n / 2.0 - r) * ps, y0 = y1 - ps;
                    double lo = -1e300, hi = 1e300;
                    auto slab = [&](double p, double dir, double a, double b) {
                        if (std::abs(dir) < 1e-15) {
                            if (p <= a || p >= b) hi = -1e300;
                            return;
                        }
                        double ta = (a - p) / dir, tb = (b - p) / dir;
                        if (ta > tb) std::swap(ta, tb);
                        lo = std::max(lo, ta);
                        hi = std::min(hi, tb);
                    };
                    slab(px, dx, x0, x1);
                    slab(py, dy, y0, y1);
                    if (hi > lo) M[static_cast<size_t>(v) * g.bins + d][static_cast<size_t>(r) * n + col] = hi - lo;
                }
            }
        }
    }
    return M;
}

inline std::vector<double> dense_apply(const std::vector<std::vector<double>>& M, const std::vector<double>& x) {
    std::vector<double> out(M.size(), 0.0);
    for (size_t i = 0; i < M.size(); ++i) out[i] = dot(M[i], x);
    return out;
}

inline std::vector<double> dense_apply_transpose(const std::vector<std::vector<double>>& M,
                                                 const std::vector<double>& y) {
    std::vector<double> out(M.empty() ? 0 : M[0].size(), 0.0);
    for (size_t i = 0; i < M.size(); ++i)
        for (size_t j = 0; j < out.size(); ++j) out[j] += M[i][j] * y[i];
    return out;
}

/// Fresh scratch directory below the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("dnrnet_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace dnr::test
