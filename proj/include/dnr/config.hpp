#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dnr/dataset.hpp"
#include "dnr/dnrnet.hpp"
#include "dnr/osem.hpp"
#include "dnr/phantom.hpp"
#include "dnr/train.hpp"

namespace dnr {

struct GeometryConfig {
    int n = 64;
    int views = 24;
    double arc_degrees = 360.0;

    Geometry build() const;
};

/// Everything a pipeline run needs. Defaults are the desk-scale settings.
struct RunConfig {
    GeometryConfig geometry;
    double total_counts = 1e5;
    RandomizationLimits limits;
    OsemConfig osem;
    ButterworthConfig butterworth;
    NetworkConfig network;
    /// Denominator guard (counts) of the linear operator inside the network.
    double operator_eps = 50.0;
    TrainConfig train;
    int dataset_size = 300;
    std::uint64_t dataset_seed = 2021;
    std::uint64_t model_seed = 11;
    int threads = 0;  ///< 0 = OpenMP default

    DatasetConfig dataset_config() const;
    ObjectiveConfig operator_config() const;
    void validate() const;
};

/// JSON round trip. Unknown keys raise ConfigError; missing keys keep defaults.
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace dnr
