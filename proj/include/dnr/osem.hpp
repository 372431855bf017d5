#pragma once

#include <functional>
#include <optional>

#include "dnr/tomo.hpp"

namespace dnr {

struct OsemConfig {
    int iterations = 8;
    int subsets = 4;
    double init_value = 1.0;
    double eps = 1e-12;

    void validate() const;
};

struct ButterworthConfig {
    int order = 3;
    double cutoff = 0.3;  ///< cycles per pixel, in (0, 0.5]

    void validate() const;
};

/// Called after each full iteration with (iteration index, current image).
using OsemObserver = std::function<void(int, const Image&)>;

/// Ordered-subset EM. Subset s holds views v with v mod S == s, visited in order.
/// `initial` replaces the uniform start when given.
Image osem_reconstruct(const Sinogram& y, const SystemMatrix& A, const OsemConfig& cfg = {},
                       const std::optional<Image>& initial = std::nullopt,
                       const OsemObserver& observer = {});

/// Radial Butterworth low-pass H = 1 / (1 + (rho / fc)^(2 order)) applied in the DFT domain.
Image butterworth_filter(const Image& f, const ButterworthConfig& cfg);

/// Gain of the filter at radial frequency rho (cycles per pixel).
double butterworth_gain(double rho, const ButterworthConfig& cfg);

}  // namespace dnr
