#include "dnr/tomo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace dnr {

Image::Image(int side, double value, double pixel) : n(side), pixel_size(pixel) {
    if (side < 1) throw DimensionError("image side must be positive");
    data.assign(static_cast<size_t>(side) * side, value);
}

Sinogram::Sinogram(int v, int d, double value) : views(v), bins(d) {
    if (v < 1 || d < 1) throw DimensionError("sinogram dimensions must be positive");
    data.assign(static_cast<size_t>(v) * d, value);
}

Geometry Geometry::parallel(int n, int views, int bins, double arc, double pixel_size) {
    if (n < 1 || views < 1 || bins < 1)
        throw DimensionError("geometry needs n, views and bins >= 1");
    if (!(pixel_size > 0.0)) throw DimensionError("pixel size must be positive");
    Geometry g;
    g.n = n;
    g.views = views;
    g.bins = bins;
    g.arc = arc;
    g.pixel_size = pixel_size;
    g.angles.resize(views);
    for (int v = 0; v < views; ++v) g.angles[v] = v * arc / views;
    return g;
}

Geometry Geometry::standard(int n, int views) {
    return parallel(n, views, n, 2.0 * std::numbers::pi);
}

bool Geometry::same_as(const Geometry& o) const {
    return n == o.n && views == o.views && bins == o.bins && pixel_size == o.pixel_size &&
           angles == o.angles;
}

bool SystemMatrix::structurally_equal(const SystemMatrix& o) const {
    if (row_ptr_ != o.row_ptr_ || entries_.size() != o.entries_.size()) return false;
    for (size_t k = 0; k < entries_.size(); ++k) {
        if (entries_[k].pixel != o.entries_[k].pixel || entries_[k].weight != o.entries_[k].weight)
            return false;
    }
    return true;
}

namespace {

// Exact values for multiples of pi/2 so that periodic angles give identical rays.
double snap(double x) {
    constexpr double tiny = 1e-14;
    if (std::abs(x) < tiny) return 0.0;
    if (std::abs(x - 1.0) < tiny) return 1.0;
    if (std::abs(x + 1.0) < tiny) return -1.0;
    return x;
}

double reduce_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r < 0) r += two_pi;
    return r;
}

// Siddon traversal of one ray through the n x n grid centered on the origin.
void trace_ray(double px, double py, double dx, double dy, int n, double ps,
               std::vector<double>& crossings, std::vector<SystemMatrix::Entry>& out) {
    const double h = 0.5 * n * ps;
    constexpr double parallel_eps = 1e-15;
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();

    auto clip = [&](double p, double d) {
        if (std::abs(d) < parallel_eps) return p >= -h && p <= h;
        double t0 = (-h - p) / d;
        double t1 = (h - p) / d;
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        return true;
    };
    if (!clip(px, dx) || !clip(py, dy) || !(tmax > tmin)) return;

    crossings.clear();
    crossings.push_back(tmin);
    crossings.push_back(tmax);
    if (std::abs(dx) >= parallel_eps) {
        for (int k = 0; k <= n; ++k) {
            double t = (-h + k * ps - px) / dx;
            if (t > tmin && t < tmax) crossings.push_back(t);
        }
    }
    if (std::abs(dy) >= parallel_eps) {
        for (int k = 0; k <= n; ++k) {
            double t = (-h + k * ps - py) / dy;
            if (t > tmin && t < tmax) crossings.push_back(t);
        }
    }
    std::sort(crossings.begin(), crossings.end());

    const double min_len = 1e-12 * ps;
    for (size_t k = 0; k + 1 < crossings.size(); ++k) {
        double len = crossings[k + 1] - crossings[k];
        if (len <= min_len) continue;
        double tm = 0.5 * (crossings[k] + crossings[k + 1]);
        double x = px + tm * dx;
        double y = py + tm * dy;
        int col = std::clamp(static_cast<int>(std::floor((x + h) / ps)), 0, n - 1);
        int row = std::clamp(static_cast<int>(std::floor((h - y) / ps)), 0, n - 1);
        auto pix = static_cast<std::uint32_t>(row * n + col);
        if (!out.empty() && out.back().pixel == pix)
            out.back().weight += len;
        else
            out.push_back({pix, len});
    }
}

}  // namespace

SystemMatrix build_system_matrix(const Geometry& geom) {
    if (geom.n < 1 || geom.views < 1 || geom.bins < 1)
        throw DimensionError("geometry needs n, views and bins >= 1");
    if (static_cast<int>(geom.angles.size()) != geom.views)
        throw DimensionError("geometry angle count differs from view count");

    SystemMatrix A;
    A.geom_ = geom;
    const int n = geom.n;
    const double ps = geom.pixel_size;
    A.row_ptr_.reserve(static_cast<size_t>(geom.views) * geom.bins + 1);
    A.row_ptr_.push_back(0);
    A.col_sums_.assign(static_cast<size_t>(n) * n, 0.0);

    std::vector<double> crossings;
    std::vector<SystemMatrix::Entry> ray;
    for (int v = 0; v < geom.views; ++v) {
        const double a = reduce_angle(geom.angles[v]);
        const double ex = snap(std::cos(a));
        const double ey = snap(std::sin(a));
        // Ray direction is the detector axis rotated by +90 degrees.
        const double dx = -ey;
        const double dy = ex;
        for (int d = 0; d < geom.bins; ++d) {
            const double s = (d + 0.5 - 0.5 * geom.bins) * ps;
            ray.clear();
            trace_ray(s * ex, s * ey, dx, dy, n, ps, crossings, ray);
            for (const auto& e : ray) {
                if (e.weight > 0.0) {
                    A.entries_.push_back(e);
                    A.col_sums_[e.pixel] += e.weight;
                }
            }
            A.row_ptr_.push_back(A.entries_.size());
        }
    }
    return A;
}

void check_image(const SystemMatrix& A, const Image& f) {
    if (f.n != A.geometry().n || f.data.size() != A.cols())
        throw DimensionError("image side " + std::to_string(f.n) + " does not match geometry n = " +
                             std::to_string(A.geometry().n));
}

void check_sinogram(const SystemMatrix& A, const Sinogram& y) {
    const auto& g = A.geometry();
    if (y.views != g.views || y.bins != g.bins || y.data.size() != A.rows())
        throw DimensionError("sinogram " + std::to_string(y.views) + "x" + std::to_string(y.bins) +
                             " does not match geometry " + std::to_string(g.views) + "x" +
                             std::to_string(g.bins));
}

void forward_project(const SystemMatrix& A, std::span<const double> f, std::span<double> out) {
    const size_t rows = A.rows();
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (const auto& e : A.row(i)) acc += e.weight * f[e.pixel];
        out[i] = acc;
    }
}

void back_project(const SystemMatrix& A, std::span<const double> y, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const size_t rows = A.rows();
    for (size_t i = 0; i < rows; ++i) {
        const double yi = y[i];
        if (yi == 0.0) continue;
        for (const auto& e : A.row(i)) out[e.pixel] += e.weight * yi;
    }
}

Sinogram forward_project(const SystemMatrix& A, const Image& f) {
    check_image(A, f);
    Sinogram y(A.geometry().views, A.geometry().bins);
    forward_project(A, f.data, y.data);
    return y;
}

Image back_project(const SystemMatrix& A, const Sinogram& y) {
    check_sinogram(A, y);
    Image g(A.geometry().n, 0.0, A.geometry().pixel_size);
    back_project(A, y.data, g.data);
    return g;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Sinogram sample_poisson(const Sinogram& mean, std::uint64_t seed) {
    for (double m : mean.data) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("Poisson mean must be finite and >= 0");
    }
    Sinogram out = mean;
    const std::uint64_t base = splitmix64(seed);
    const auto count = static_cast<std::int64_t>(mean.data.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
        const double m = mean.data[i];
        if (m == 0.0) {
            out.data[i] = 0.0;
            continue;
        }
        std::mt19937_64 rng(splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(i))));
        std::poisson_distribution<std::int64_t> dist(m);
        out.data[i] = static_cast<double>(dist(rng));
    }
    return out;
}

Image scale_to_counts(const Image& f, const SystemMatrix& A, double total_counts) {
    if (!(total_counts > 0.0)) throw DomainError("total_counts must be positive");
    for (double v : f.data) {
        if (v < 0.0) throw DomainError("scale_to_counts expects a nonnegative image");
    }
    const Sinogram y = forward_project(A, f);
    double sum = 0.0;
    for (double v : y.data) sum += v;
    if (!(sum > 0.0)) throw DomainError("image has zero projection; cannot scale to counts");
    Image out = f;
    const double c = total_counts / sum;
    for (double& v : out.data) v *= c;
    return out;
}

}  // namespace dnr
