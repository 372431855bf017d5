#include "dnr/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dnr/io.hpp"

namespace dnr {

using nlohmann::json;

void DatasetConfig::validate() const {
    if (size < 1) throw ConfigError("dataset size must be >= 1");
    if (n < 2) throw ConfigError("image side must be >= 2");
    if (views < 1) throw ConfigError("view count must be >= 1");
    if (!(total_counts > 0.0)) throw ConfigError("total counts must be positive");
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, int id) {
    std::uint64_t x = dataset_seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(id) + 1;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Sample simulate_sample(const PhantomSpec& spec, const SystemMatrix& A, double total_counts, std::uint64_t seed,
                       int id) {
    Sample s;
    s.id = id;
    s.seed = seed;
    s.truth = scale_to_counts(render_phantom(spec), A, total_counts);
    s.sinogram = sample_poisson(forward_project(A, s.truth), seed ^ 0x5851f42d4c957f2dULL);
    return s;
}

Dataset generate_dataset(const RandomizationLimits& limits, const DatasetConfig& cfg, const SystemMatrix& A) {
    cfg.validate();
    limits.validate();
    if (A.geometry().n != cfg.n || A.geometry().views != cfg.views)
        throw DimensionError("dataset geometry differs from the system matrix");
    Dataset ds;
    ds.geometry = A.geometry();
    ds.total_counts = cfg.total_counts;
    ds.seed = cfg.seed;
    ds.samples.resize(cfg.size);
#pragma omp parallel for schedule(dynamic)
    for (int id = 0; id < cfg.size; ++id) {
        const auto seed = sample_seed(cfg.seed, id);
        ds.samples[id] = simulate_sample(sample_random_phantom(limits, cfg.n, seed), A, cfg.total_counts, seed, id);
    }
    return ds;
}

namespace {

std::string image_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "image_%05d.csv", id);
    return buf;
}

std::string sinogram_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sinogram_%05d.csv", id);
    return buf;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create dataset directory " + dir.string());
    const auto& g = ds.geometry;
    json meta = {{"format", "dnrnet-dataset-1"},
                 {"size", ds.samples.size()},
                 {"seed", ds.seed},
                 {"total_counts", ds.total_counts},
                 {"geometry", {{"n", g.n}, {"views", g.views}, {"bins", g.bins}, {"arc", g.arc},
                               {"pixel_size", g.pixel_size}}}};
    io::write_text(dir / "dataset.json", meta.dump(2) + "\n");

    std::ostringstream manifest;
    manifest << "id,seed,image,sinogram\n";
    for (const auto& s : ds.samples) {
        io::write_image_csv(dir / image_name(s.id), s.truth);
        io::write_sinogram_csv(dir / sinogram_name(s.id), s.sinogram);
        manifest << s.id << ',' << s.seed << ',' << image_name(s.id) << ',' << sinogram_name(s.id) << '\n';
    }
    io::write_text(dir / "manifest.csv", manifest.str());
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    try {
        const json meta = json::parse(io::read_text(dir / "dataset.json"));
        const auto& g = meta.at("geometry");
        ds.geometry = Geometry::parallel(g.at("n").get<int>(), g.at("views").get<int>(), g.at("bins").get<int>(),
                                         g.at("arc").get<double>(), g.at("pixel_size").get<double>());
        ds.total_counts = meta.at("total_counts").get<double>();
        ds.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw IoError("malformed dataset.json in " + dir.string() + ": " + e.what());
    }

    std::ifstream in(dir / "manifest.csv");
    if (!in) throw IoError("cannot open " + (dir / "manifest.csv").string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("id,seed,image,sinogram", 0) != 0) throw IoError("dataset manifest has an unexpected header");
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id, seed, img, sino;
        if (!std::getline(ss, id, ',') || !std::getline(ss, seed, ',') || !std::getline(ss, img, ',') ||
            !std::getline(ss, sino))
            throw IoError("bad manifest row: " + line);
        Sample s;
        try {
            s.id = std::stoi(id);
            s.seed = std::stoull(seed);
        } catch (const std::exception&) {
            throw IoError("bad manifest row: " + line);
        }
        s.truth = io::read_image_csv(dir / img);
        s.sinogram = io::read_sinogram_csv(dir / sino);
        if (s.truth.n != ds.geometry.n || s.sinogram.views != ds.geometry.views ||
            s.sinogram.bins != ds.geometry.bins)
            throw DimensionError("sample " + id + " does not match the dataset geometry");
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw IoError("dataset " + dir.string() + " has no samples");
    return ds;
}

}  // namespace dnr
