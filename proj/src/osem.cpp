#include "dnr/osem.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fftw3.h>

#include "dnr/objective.hpp"

namespace dnr {

void OsemConfig::validate() const {
    if (iterations < 1) throw ConfigError("OSEM iterations must be >= 1");
    if (subsets < 1) throw ConfigError("OSEM subsets must be >= 1");
    if (!(init_value > 0.0)) throw ConfigError("OSEM init value must be positive");
    if (!(eps > 0.0)) throw ConfigError("OSEM eps must be positive");
}

void ButterworthConfig::validate() const {
    if (order < 1) throw ConfigError("Butterworth order must be >= 1");
    if (!(cutoff > 0.0 && cutoff <= 0.5)) throw ConfigError("Butterworth cutoff must lie in (0, 0.5]");
}

Image osem_reconstruct(const Sinogram& y, const SystemMatrix& A, const OsemConfig& cfg,
                       const std::optional<Image>& initial, const OsemObserver& observer) {
    cfg.validate();
    check_sinogram(A, y);
    validate_counts(y);
    const auto& g = A.geometry();
    if (cfg.subsets > g.views) throw ConfigError("more OSEM subsets than views");

    Image f = initial ? *initial : Image(g.n, cfg.init_value, g.pixel_size);
    check_image(A, f);
    for (double& v : f.data) v = std::max(v, 0.0);

    const size_t npix = A.cols();
    const int S = cfg.subsets;

    std::vector<std::vector<double>> sensitivity(S, std::vector<double>(npix, 0.0));
    for (int v = 0; v < g.views; ++v) {
        auto& sens = sensitivity[v % S];
        for (int d = 0; d < g.bins; ++d) {
            for (const auto& e : A.row(static_cast<size_t>(v) * g.bins + d)) sens[e.pixel] += e.weight;
        }
    }

    std::vector<double> update(npix);
    for (int it = 0; it < cfg.iterations; ++it) {
        for (int s = 0; s < S; ++s) {
            std::fill(update.begin(), update.end(), 0.0);
            for (int v = s; v < g.views; v += S) {
                for (int d = 0; d < g.bins; ++d) {
                    const size_t i = static_cast<size_t>(v) * g.bins + d;
                    const auto row = A.row(i);
                    double expected = 0.0;
                    for (const auto& e : row) expected += e.weight * f.data[e.pixel];
                    const double ratio = y.data[i] / std::max(expected, cfg.eps);
                    if (ratio == 0.0) continue;
                    for (const auto& e : row) update[e.pixel] += e.weight * ratio;
                }
            }
            const auto& sens = sensitivity[s];
            for (size_t j = 0; j < npix; ++j) {
                if (sens[j] > 0.0) f.data[j] *= update[j] / sens[j];
            }
        }
        if (observer) observer(it, f);
    }
    return f;
}

double butterworth_gain(double rho, const ButterworthConfig& cfg) {
    return 1.0 / (1.0 + std::pow(rho / cfg.cutoff, 2.0 * cfg.order));
}

namespace {

// Signed DFT frequency in cycles per sample for index k of an n-point transform.
double frequency(int k, int n) {
    const int signed_k = k <= n / 2 ? k : k - n;
    return static_cast<double>(signed_k) / n;
}

}  // namespace

Image butterworth_filter(const Image& f, const ButterworthConfig& cfg) {
    cfg.validate();
    if (f.n < 2) throw DimensionError("Butterworth filter needs n >= 2");
    const int n = f.n;
    const size_t count = static_cast<size_t>(n) * n;

    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count));
    for (size_t j = 0; j < count; ++j) {
        buf[j][0] = f.data[j];
        buf[j][1] = 0.0;
    }
    // FFTW planners are not thread-safe; plans are created inside a critical section.
    fftw_plan fwd;
    fftw_plan inv;
#pragma omp critical(dnr_fftw_plan)
    {
        fwd = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        inv = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(fwd);
    for (int r = 0; r < n; ++r) {
        const double fy = frequency(r, n);
        for (int c = 0; c < n; ++c) {
            const double fx = frequency(c, n);
            const double h = butterworth_gain(std::hypot(fx, fy), cfg);
            const size_t j = static_cast<size_t>(r) * n + c;
            buf[j][0] *= h;
            buf[j][1] *= h;
        }
    }
    fftw_execute(inv);

    Image out(n, 0.0, f.pixel_size);
    const double scale = 1.0 / static_cast<double>(count);
    for (size_t j = 0; j < count; ++j) out.data[j] = buf[j][0] * scale;
#pragma omp critical(dnr_fftw_plan)
    {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }
    fftw_free(buf);
    return out;
}

}  // namespace dnr
