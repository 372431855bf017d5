#pragma once

#include <string>
#include <vector>

#include "dnr/phantom.hpp"
#include "dnr/tomo.hpp"

namespace dnr {

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    /// Dynamic range; <= 0 means "max - min of the reference image".
    double dynamic_range = 0.0;
};

/// Mean SSIM between a reconstruction and the reference. Local statistics use a
/// Gaussian window truncated at the border and renormalised over in-image pixels.
double ssim(const Image& recon, const Image& reference, const SsimConfig& cfg = {});

/// Per-pixel SSIM map (same layout as the images).
std::vector<double> ssim_map(const Image& recon, const Image& reference, const SsimConfig& cfg = {});

/// |mean(roi) - mean(background)| / population std(background).
double cnr(const Image& f, const std::vector<bool>& roi, const std::vector<bool>& background);

struct RoiScore {
    std::string name;
    double mean = 0.0;
    double cnr = 0.0;
};

struct RoiReport {
    std::vector<RoiScore> rois;
    double background_mean = 0.0;
    double background_std = 0.0;
    double mean_cnr() const;
};

RoiReport roi_report(const Image& f, const PhantomSpec& spec);

struct NamedImage {
    std::string name;
    Image image;
};

struct ScoreRow {
    std::string method;
    double ssim = 0.0;
    double cnr = 0.0;
};

std::vector<ScoreRow> score_table(const std::vector<NamedImage>& recons, const Image& truth,
                                  const PhantomSpec& spec, const SsimConfig& cfg = {});

/// Fixed-width table: one row per method, columns SSIM and CNR.
std::string format_score_table(const std::vector<ScoreRow>& rows);
/// "method,ssim,cnr" with a header line.
std::string score_table_csv(const std::vector<ScoreRow>& rows);

}  // namespace dnr
