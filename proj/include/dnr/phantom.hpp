#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dnr/tomo.hpp"

namespace dnr {

enum class SourceProfile {
    fermi,    ///< soft-edged blob: A / (exp((r - R) / (d R)) + 1)
    ellipse,  ///< hard-edged constant ellipse (Shepp-Logan style)
};

/// One ellipsoidal source. Lengths are in pixels relative to the image center,
/// y pointing up. The boundary radius along polar angle t is
/// u v / sqrt(u^2 cos^2(t - phi) + v^2 sin^2(t - phi)).
struct SourceSpec {
    double amplitude = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double u = 1.0;
    double v = 1.0;
    double phi = 0.0;
    double diffusion = 0.05;
    SourceProfile profile = SourceProfile::fermi;
    /// ROI sources get a CNR mask; non-ROI sources (e.g. a skull outline) bound the background.
    bool roi = true;
    std::string name;
};

struct NamedMask {
    std::string name;
    std::vector<bool> mask;
};

struct PhantomSpec {
    int n = 0;
    double background = 0.0;
    std::vector<SourceSpec> sources;

    /// One mask per ROI source, in source order.
    std::vector<NamedMask> roi_masks() const;
    /// Pixels outside a 2-pixel dilation of every ROI, inside the non-ROI support
    /// (eroded by 2 px) and inside the inscribed field-of-view disk.
    std::vector<bool> background_mask() const;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Sampling ranges for random training phantoms. Center radius and semi-axes
/// are fractions: centers lie in a disk of radius center_radius * n/2, axes are
/// axes.{lo,hi} * n.
struct RandomizationLimits {
    int k_min = 1;
    int k_max = 5;
    Interval background{0.05, 0.3};
    Interval amplitude{-0.5, 1.0};
    double center_radius = 0.8;
    Interval axes{0.05, 0.25};
    Interval phi{0.0, 3.14159265358979323846};
    Interval diffusion{0.02, 0.15};

    void validate() const;
};

struct RenderResult {
    Image image;
    /// Number of pixels where the raw superposition was negative and clamped to 0.
    std::size_t clamped_pixels = 0;
};

double geometric_radius(const SourceSpec& src, double theta);

/// Pixel center coordinates (x, y) for (row, col).
std::pair<double, double> pixel_center(int n, int row, int col);

RenderResult render_phantom_detailed(const PhantomSpec& spec);
Image render_phantom(const PhantomSpec& spec);

PhantomSpec sample_random_phantom(const RandomizationLimits& limits, int n, std::uint64_t seed);

/// Presets "A", "B", "shepp_logan", loaded from the repository data directory.
PhantomSpec preset_phantom(const std::string& name, int n);
std::filesystem::path data_dir();

std::string phantom_to_json(const PhantomSpec& spec);
PhantomSpec phantom_from_json(const std::string& text);
void save_phantom(const std::filesystem::path& path, const PhantomSpec& spec);
PhantomSpec load_phantom(const std::filesystem::path& path);

}  // namespace dnr
