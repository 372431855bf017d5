#include "dnr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dnr {

namespace {

std::vector<double> gaussian_taps(int window, double sigma) {
    std::vector<double> taps(window);
    const int half = window / 2;
    for (int k = 0; k < window; ++k) {
        const double d = k - half;
        taps[k] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return taps;
}

// Separable weighted local average with the window truncated at the border.
std::vector<double> local_mean(const std::vector<double>& src, int n, const std::vector<double>& taps) {
    const int half = static_cast<int>(taps.size()) / 2;
    std::vector<double> tmp(src.size());
    std::vector<double> out(src.size());
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            double acc = 0.0;
            double wsum = 0.0;
            for (int k = -half; k <= half; ++k) {
                const int cc = c + k;
                if (cc < 0 || cc >= n) continue;
                acc += taps[k + half] * src[static_cast<size_t>(r) * n + cc];
                wsum += taps[k + half];
            }
            tmp[static_cast<size_t>(r) * n + c] = acc / wsum;
        }
    }
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            double acc = 0.0;
            double wsum = 0.0;
            for (int k = -half; k <= half; ++k) {
                const int rr = r + k;
                if (rr < 0 || rr >= n) continue;
                acc += taps[k + half] * tmp[static_cast<size_t>(rr) * n + c];
                wsum += taps[k + half];
            }
            out[static_cast<size_t>(r) * n + c] = acc / wsum;
        }
    }
    return out;
}

double dynamic_range(const Image& reference, const SsimConfig& cfg) {
    if (cfg.dynamic_range > 0.0) return cfg.dynamic_range;
    const auto [lo, hi] = std::minmax_element(reference.data.begin(), reference.data.end());
    return *hi - *lo;
}

}  // namespace

std::vector<double> ssim_map(const Image& recon, const Image& reference, const SsimConfig& cfg) {
    if (recon.n != reference.n || recon.data.size() != reference.data.size())
        throw DimensionError("ssim: image shapes differ");
    if (cfg.window < 1 || cfg.window % 2 == 0 || !(cfg.sigma > 0.0))
        throw ConfigError("ssim: window must be odd and sigma positive");
    const double L = dynamic_range(reference, cfg);
    if (!(L > 0.0)) throw DomainError("ssim: reference image has zero dynamic range");
    const double c1 = (cfg.k1 * L) * (cfg.k1 * L);
    const double c2 = (cfg.k2 * L) * (cfg.k2 * L);

    const int n = recon.n;
    const auto taps = gaussian_taps(cfg.window, cfg.sigma);
    const auto& x = recon.data;
    const auto& y = reference.data;
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (size_t j = 0; j < x.size(); ++j) {
        xx[j] = x[j] * x[j];
        yy[j] = y[j] * y[j];
        xy[j] = x[j] * y[j];
    }
    const auto mx = local_mean(x, n, taps);
    const auto my = local_mean(y, n, taps);
    const auto mxx = local_mean(xx, n, taps);
    const auto myy = local_mean(yy, n, taps);
    const auto mxy = local_mean(xy, n, taps);

    std::vector<double> map(x.size());
    for (size_t j = 0; j < x.size(); ++j) {
        const double vx = mxx[j] - mx[j] * mx[j];
        const double vy = myy[j] - my[j] * my[j];
        const double cov = mxy[j] - mx[j] * my[j];
        map[j] = ((2.0 * mx[j] * my[j] + c1) * (2.0 * cov + c2)) /
                 ((mx[j] * mx[j] + my[j] * my[j] + c1) * (vx + vy + c2));
    }
    return map;
}

double ssim(const Image& recon, const Image& reference, const SsimConfig& cfg) {
    const auto map = ssim_map(recon, reference, cfg);
    double acc = 0.0;
    for (double v : map) acc += v;
    return acc / static_cast<double>(map.size());
}

double cnr(const Image& f, const std::vector<bool>& roi, const std::vector<bool>& background) {
    if (roi.size() != f.data.size() || background.size() != f.data.size())
        throw DimensionError("cnr: mask size differs from image");
    double roi_sum = 0.0;
    size_t roi_count = 0;
    double bg_sum = 0.0;
    size_t bg_count = 0;
    for (size_t j = 0; j < f.data.size(); ++j) {
        if (roi[j]) {
            roi_sum += f.data[j];
            ++roi_count;
        }
        if (background[j]) {
            bg_sum += f.data[j];
            ++bg_count;
        }
    }
    if (roi_count == 0) throw DomainError("cnr: empty ROI mask");
    if (bg_count < 2) throw DomainError("cnr: background needs at least 2 pixels");
    const double mu_roi = roi_sum / static_cast<double>(roi_count);
    const double mu_bg = bg_sum / static_cast<double>(bg_count);
    double var = 0.0;
    for (size_t j = 0; j < f.data.size(); ++j) {
        if (background[j]) var += (f.data[j] - mu_bg) * (f.data[j] - mu_bg);
    }
    const double sigma = std::sqrt(var / static_cast<double>(bg_count));
    if (!(sigma > 0.0)) throw DomainError("cnr: background standard deviation is zero");
    return std::abs(mu_roi - mu_bg) / sigma;
}

double RoiReport::mean_cnr() const {
    if (rois.empty()) throw DomainError("roi report has no ROIs");
    double acc = 0.0;
    for (const auto& r : rois) acc += r.cnr;
    return acc / static_cast<double>(rois.size());
}

RoiReport roi_report(const Image& f, const PhantomSpec& spec) {
    if (spec.n != f.n) throw DimensionError("roi report: phantom and image sizes differ");
    const auto bg = spec.background_mask();
    const auto masks = spec.roi_masks();
    if (masks.empty()) throw DomainError("phantom has no ROI masks");
    RoiReport rep;
    size_t count = 0;
    for (size_t j = 0; j < bg.size(); ++j) {
        if (bg[j]) {
            rep.background_mean += f.data[j];
            ++count;
        }
    }
    if (count < 2) throw DomainError("phantom background mask has fewer than 2 pixels");
    rep.background_mean /= static_cast<double>(count);
    double var = 0.0;
    for (size_t j = 0; j < bg.size(); ++j) {
        if (bg[j]) var += (f.data[j] - rep.background_mean) * (f.data[j] - rep.background_mean);
    }
    rep.background_std = std::sqrt(var / static_cast<double>(count));
    for (const auto& m : masks) {
        double sum = 0.0;
        size_t k = 0;
        for (size_t j = 0; j < m.mask.size(); ++j) {
            if (m.mask[j]) {
                sum += f.data[j];
                ++k;
            }
        }
        // Sources smaller than a pixel can have empty masks at coarse grids.
        if (k == 0) continue;
        rep.rois.push_back({m.name, sum / static_cast<double>(k), cnr(f, m.mask, bg)});
    }
    return rep;
}

std::vector<ScoreRow> score_table(const std::vector<NamedImage>& recons, const Image& truth,
                                  const PhantomSpec& spec, const SsimConfig& cfg) {
    std::vector<ScoreRow> rows;
    for (const auto& r : recons) {
        if (r.image.n != truth.n) throw DimensionError("score table: '" + r.name + "' has the wrong size");
        rows.push_back({r.name, ssim(r.image, truth, cfg), roi_report(r.image, spec).mean_cnr()});
    }
    return rows;
}

std::string format_score_table(const std::vector<ScoreRow>& rows) {
    std::ostringstream ss;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-24s %8s %8s\n", "method", "SSIM", "CNR");
    ss << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-24s %8.4f %8.3f\n", r.method.c_str(), r.ssim, r.cnr);
        ss << buf;
    }
    return ss.str();
}

std::string score_table_csv(const std::vector<ScoreRow>& rows) {
    std::ostringstream ss;
    ss << "method,ssim,cnr\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", r.method.c_str(), r.ssim, r.cnr);
        ss << buf;
    }
    return ss.str();
}

}  // namespace dnr
