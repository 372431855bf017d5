#include "dnr/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>

#include <json.hpp>

#include "dnr/io.hpp"

namespace dnr {

using nlohmann::json;

double geometric_radius(const SourceSpec& src, double theta) {
    if (!(src.u > 0.0) || !(src.v > 0.0)) throw DomainError("semi-axes must be positive");
    const double c = std::cos(theta - src.phi);
    const double s = std::sin(theta - src.phi);
    return src.u * src.v / std::sqrt(src.u * src.u * c * c + src.v * src.v * s * s);
}

std::pair<double, double> pixel_center(int n, int row, int col) {
    return {col + 0.5 - 0.5 * n, 0.5 * n - row - 0.5};
}

namespace {

void validate_source(const SourceSpec& s) {
    if (!(s.u > 0.0) || !(s.v > 0.0)) throw DomainError("source semi-axes must be positive");
    if (s.profile == SourceProfile::fermi && !(s.diffusion > 0.0))
        throw DomainError("source diffusion must be positive");
}

// Returns (r, R) for the pixel center relative to the source.
std::pair<double, double> radial(const SourceSpec& s, double x, double y) {
    const double dx = x - s.cx;
    const double dy = y - s.cy;
    const double r = std::hypot(dx, dy);
    return {r, geometric_radius(s, std::atan2(dy, dx))};
}

double contribution(const SourceSpec& s, double x, double y) {
    const auto [r, R] = radial(s, x, y);
    if (s.profile == SourceProfile::ellipse) return r < R ? s.amplitude : 0.0;
    return s.amplitude / (std::exp((r - R) / (s.diffusion * R)) + 1.0);
}

bool inside(const SourceSpec& s, double x, double y) {
    const auto [r, R] = radial(s, x, y);
    return r < R;
}

std::vector<bool> dilate(const std::vector<bool>& mask, int n, int radius) {
    std::vector<bool> out(mask.size(), false);
    const int r2 = radius * radius;
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            if (!mask[static_cast<size_t>(row) * n + col]) continue;
            for (int dr = -radius; dr <= radius; ++dr) {
                for (int dc = -radius; dc <= radius; ++dc) {
                    if (dr * dr + dc * dc > r2) continue;
                    const int rr = row + dr;
                    const int cc = col + dc;
                    if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
                    out[static_cast<size_t>(rr) * n + cc] = true;
                }
            }
        }
    }
    return out;
}

constexpr int mask_margin = 2;

}  // namespace

std::vector<NamedMask> PhantomSpec::roi_masks() const {
    std::vector<NamedMask> masks;
    for (size_t k = 0; k < sources.size(); ++k) {
        const auto& s = sources[k];
        if (!s.roi) continue;
        NamedMask m;
        m.name = s.name.empty() ? "source" + std::to_string(k) : s.name;
        m.mask.assign(static_cast<size_t>(n) * n, false);
        for (int row = 0; row < n; ++row) {
            for (int col = 0; col < n; ++col) {
                const auto [x, y] = pixel_center(n, row, col);
                m.mask[static_cast<size_t>(row) * n + col] = inside(s, x, y);
            }
        }
        masks.push_back(std::move(m));
    }
    return masks;
}

std::vector<bool> PhantomSpec::background_mask() const {
    const size_t count = static_cast<size_t>(n) * n;
    std::vector<bool> rois(count, false);
    std::vector<bool> outside_support(count, false);
    const double fov = 0.5 * n - mask_margin;
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            const auto [x, y] = pixel_center(n, row, col);
            const size_t j = static_cast<size_t>(row) * n + col;
            for (const auto& s : sources) {
                if (s.roi) {
                    if (inside(s, x, y)) rois[j] = true;
                } else if (!inside(s, x, y)) {
                    outside_support[j] = true;
                }
            }
        }
    }
    const auto near_roi = dilate(rois, n, mask_margin);
    const auto near_edge = dilate(outside_support, n, mask_margin);
    std::vector<bool> bg(count, false);
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            const auto [x, y] = pixel_center(n, row, col);
            const size_t j = static_cast<size_t>(row) * n + col;
            bg[j] = !near_roi[j] && !near_edge[j] && std::hypot(x, y) <= fov;
        }
    }
    return bg;
}

RenderResult render_phantom_detailed(const PhantomSpec& spec) {
    if (spec.n < 1) throw DimensionError("phantom side must be positive");
    for (const auto& s : spec.sources) validate_source(s);
    RenderResult res{Image(spec.n), 0};
    const int n = spec.n;
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            const auto [x, y] = pixel_center(n, row, col);
            double value = spec.background;
            for (const auto& s : spec.sources) value += contribution(s, x, y);
            if (value < 0.0) {
                value = 0.0;
                ++res.clamped_pixels;
            }
            res.image.at(row, col) = value;
        }
    }
    return res;
}

Image render_phantom(const PhantomSpec& spec) { return render_phantom_detailed(spec).image; }

void RandomizationLimits::validate() const {
    auto check = [](const Interval& i, const char* what) {
        if (!(i.lo <= i.hi)) throw ConfigError(std::string("limits: empty interval for ") + what);
    };
    if (k_min < 0 || k_min > k_max) throw ConfigError("limits: bad source count range");
    check(background, "background");
    check(amplitude, "amplitude");
    check(axes, "axes");
    check(phi, "phi");
    check(diffusion, "diffusion");
    if (background.lo < 0.0) throw ConfigError("limits: background must be nonnegative");
    if (!(axes.lo > 0.0)) throw ConfigError("limits: semi-axes must be positive");
    if (!(diffusion.lo > 0.0)) throw ConfigError("limits: diffusion must be positive");
    if (!(center_radius >= 0.0)) throw ConfigError("limits: center radius must be nonnegative");
}

PhantomSpec sample_random_phantom(const RandomizationLimits& limits, int n, std::uint64_t seed) {
    limits.validate();
    if (n < 1) throw DimensionError("phantom side must be positive");
    std::mt19937_64 rng(seed);
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    auto draw = [&](const Interval& i) { return i.lo + (i.hi - i.lo) * unit(); };

    PhantomSpec spec;
    spec.n = n;
    const int k_span = limits.k_max - limits.k_min + 1;
    const int k = limits.k_min + std::min(k_span - 1, static_cast<int>(unit() * k_span));
    spec.background = draw(limits.background);

    const double half = 0.5 * n;
    for (int s = 0; s < k; ++s) {
        SourceSpec src;
        src.name = "source" + std::to_string(s);
        src.amplitude = draw(limits.amplitude);
        src.u = draw(limits.axes) * n;
        src.v = draw(limits.axes) * n;
        src.phi = draw(limits.phi);
        src.diffusion = draw(limits.diffusion);
        const double reach = std::max(src.u, src.v);
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const double rad = limits.center_radius * half * std::sqrt(unit());
            const double ang = 2.0 * 3.14159265358979323846 * unit();
            src.cx = rad > 0.0 ? rad * std::cos(ang) : 0.0;
            src.cy = rad > 0.0 ? rad * std::sin(ang) : 0.0;
            placed = std::hypot(src.cx, src.cy) + reach <= half;
        }
        if (!placed) throw DomainError("could not fit a random source inside the field of view");
        spec.sources.push_back(src);
    }
    return spec;
}

namespace {

const char* profile_name(SourceProfile p) { return p == SourceProfile::fermi ? "fermi" : "ellipse"; }

SourceProfile parse_profile(const std::string& s) {
    if (s == "fermi") return SourceProfile::fermi;
    if (s == "ellipse") return SourceProfile::ellipse;
    throw IoError("unknown source profile '" + s + "'");
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const char* where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw IoError(std::string(where) + ": unknown key '" + it.key() + "'");
    }
}

// Parses a phantom document; lengths are multiplied by `scale`.
PhantomSpec parse_phantom(const json& doc, int n, double scale) {
    PhantomSpec spec;
    spec.n = n;
    spec.background = doc.at("background").get<double>();
    for (const auto& js : doc.at("sources")) {
        reject_unknown(js, {"name", "amplitude", "cx", "cy", "u", "v", "phi", "diffusion", "profile", "roi"},
                       "phantom source");
        SourceSpec s;
        s.name = js.value("name", std::string{});
        s.amplitude = js.at("amplitude").get<double>();
        s.cx = js.at("cx").get<double>() * scale;
        s.cy = js.at("cy").get<double>() * scale;
        s.u = js.at("u").get<double>() * scale;
        s.v = js.at("v").get<double>() * scale;
        s.phi = js.value("phi", 0.0);
        s.diffusion = js.value("diffusion", 0.05);
        s.profile = parse_profile(js.value("profile", std::string("fermi")));
        s.roi = js.value("roi", true);
        validate_source(s);
        spec.sources.push_back(s);
    }
    return spec;
}

}  // namespace

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("DNRNET_DATA_DIR")) return env;
#ifdef DNR_DATA_DIR
    return DNR_DATA_DIR;
#else
    return "data";
#endif
}

PhantomSpec preset_phantom(const std::string& name, int n) {
    if (name != "A" && name != "B" && name != "shepp_logan")
        throw ConfigError("unknown phantom preset '" + name + "' (expected A, B or shepp_logan)");
    if (n < 1) throw DimensionError("phantom side must be positive");
    const auto path = data_dir() / "phantoms" / (name + ".json");
    json doc;
    try {
        doc = json::parse(io::read_text(path));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    if (doc.value("units", std::string{}) != "half_width")
        throw IoError(path.string() + ": preset lengths must use units = half_width");
    try {
        return parse_phantom(doc, n, 0.5 * n);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::string phantom_to_json(const PhantomSpec& spec) {
    json doc;
    doc["format"] = "dnrnet-phantom-1";
    doc["units"] = "pixels";
    doc["n"] = spec.n;
    doc["background"] = spec.background;
    doc["sources"] = json::array();
    for (const auto& s : spec.sources) {
        doc["sources"].push_back({{"name", s.name},
                                  {"amplitude", s.amplitude},
                                  {"cx", s.cx},
                                  {"cy", s.cy},
                                  {"u", s.u},
                                  {"v", s.v},
                                  {"phi", s.phi},
                                  {"diffusion", s.diffusion},
                                  {"profile", profile_name(s.profile)},
                                  {"roi", s.roi}});
    }
    return doc.dump(2) + "\n";
}

PhantomSpec phantom_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        reject_unknown(doc, {"format", "version", "units", "n", "background", "sources", "name"}, "phantom");
        if (doc.value("units", std::string("pixels")) != "pixels")
            throw IoError("phantom file must use pixel units");
        return parse_phantom(doc, doc.at("n").get<int>(), 1.0);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed phantom spec: ") + e.what());
    }
}

void save_phantom(const std::filesystem::path& path, const PhantomSpec& spec) {
    io::write_text(path, phantom_to_json(spec));
}

PhantomSpec load_phantom(const std::filesystem::path& path) {
    return phantom_from_json(io::read_text(path));
}

}  // namespace dnr
