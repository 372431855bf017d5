#include "dnr/objective.hpp"

#include <algorithm>
#include <cmath>

namespace dnr {

void validate_counts(const Sinogram& y) {
    for (double v : y.data) {
        if (!(v >= 0.0)) throw DomainError("sinogram counts must be nonnegative");
    }
}

namespace {

std::vector<double> clamp_nonnegative(std::span<const double> f) {
    std::vector<double> out(f.begin(), f.end());
    for (double& v : out) v = std::max(v, 0.0);
    return out;
}

}  // namespace

double neg_loglik(const Image& f, const Sinogram& y, const SystemMatrix& A, const ObjectiveConfig& cfg) {
    check_image(A, f);
    check_sinogram(A, y);
    validate_counts(y);
    const auto fc = clamp_nonnegative(f.data);
    std::vector<double> yt(A.rows());
    forward_project(A, fc, yt);
    double u = 0.0;
    for (size_t i = 0; i < yt.size(); ++i) {
        double term = yt[i];
        if (y.data[i] > 0.0) term -= y.data[i] * std::log(std::max(yt[i], cfg.eps_y));
        if (cfg.include_constant) term += std::lgamma(y.data[i] + 1.0);
        u += term;
    }
    return u;
}

Image grad_neg_loglik(const Image& f, const Sinogram& y, const SystemMatrix& A, const ObjectiveConfig& cfg) {
    check_image(A, f);
    check_sinogram(A, y);
    validate_counts(y);
    Image g(f.n, 0.0, f.pixel_size);
    PoissonGradient op(A, cfg);
    op.negative_gradient(f.data, y.data, g.data);
    for (double& v : g.data) v = -v;
    return g;
}

void PoissonGradient::negative_gradient(std::span<const double> f, std::span<const double> y,
                                        std::span<double> out) {
    const SystemMatrix& A = *A_;
    clamped_ = clamp_nonnegative(f);
    y_.assign(y.begin(), y.end());
    expected_.resize(A.rows());
    forward_project(A, clamped_, expected_);

    std::vector<double> ratio(A.rows());
    for (size_t i = 0; i < ratio.size(); ++i) ratio[i] = y_[i] / std::max(expected_[i], cfg_.eps_y);
    back_project(A, ratio, out);
    const auto sens = A.col_sums();
    for (size_t j = 0; j < out.size(); ++j) out[j] -= sens[j];
}

void PoissonGradient::jacobian_transpose(std::span<const double> v, std::span<double> out) const {
    const SystemMatrix& A = *A_;
    // d(-grad U)_j / df_k = -sum_i A_ij y_i / yt_i^2 A_ik * [f_k > 0]; the matrix
    // A^T W A is symmetric so the transpose only moves the clamp mask.
    std::vector<double> proj(A.rows());
    forward_project(A, v, proj);
    for (size_t i = 0; i < proj.size(); ++i) {
        const double yt = expected_[i];
        proj[i] = yt > cfg_.eps_y ? -proj[i] * y_[i] / (yt * yt) : 0.0;
    }
    back_project(A, proj, out);
    for (size_t j = 0; j < out.size(); ++j) {
        if (!(clamped_[j] > 0.0)) out[j] = 0.0;
    }
}

}  // namespace dnr
