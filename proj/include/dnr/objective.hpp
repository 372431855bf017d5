#pragma once

#include <span>
#include <vector>

#include "dnr/tomo.hpp"

namespace dnr {

struct ObjectiveConfig {
    double eps_y = 1e-12;          ///< floor applied to expected counts in logs and ratios
    bool include_constant = true;  ///< add ln(y!) so U is a proper negative log-likelihood
};

/// Poisson negative log-likelihood of counts y given image f (clamped at 0).
double neg_loglik(const Image& f, const Sinogram& y, const SystemMatrix& A,
                  const ObjectiveConfig& cfg = {});

/// dU/df_j = col_sums[j] - back_project(y / max(Af, eps))_j, with f clamped at 0.
Image grad_neg_loglik(const Image& f, const Sinogram& y, const SystemMatrix& A,
                      const ObjectiveConfig& cfg = {});

/// Gradient operator with cached intermediates so the Jacobian action can be
/// applied afterwards. Used by the unrolled network, where the image passes
/// through -grad U in every block.
class PoissonGradient {
public:
    PoissonGradient(const SystemMatrix& A, const ObjectiveConfig& cfg) : A_(&A), cfg_(cfg) {}

    /// out = -grad U(f | y). Caches the clamp mask and expected counts.
    void negative_gradient(std::span<const double> f, std::span<const double> y, std::span<double> out);

    /// Applies the transpose of d(-grad U)/df at the cached point:
    /// out = -M A^T diag(y / yt^2) A v, where M masks clamped pixels and rows
    /// with yt below eps are dropped.
    void jacobian_transpose(std::span<const double> v, std::span<double> out) const;

private:
    const SystemMatrix* A_;
    ObjectiveConfig cfg_;
    std::vector<double> clamped_;
    std::vector<double> expected_;
    std::vector<double> y_;
};

void validate_counts(const Sinogram& y);

}  // namespace dnr
