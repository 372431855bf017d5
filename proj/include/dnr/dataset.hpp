#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dnr/phantom.hpp"
#include "dnr/tomo.hpp"

namespace dnr {

struct DatasetConfig {
    int size = 300;
    int n = 64;
    int views = 24;
    double total_counts = 1e5;
    std::uint64_t seed = 2021;

    void validate() const;
};

struct Sample {
    int id = 0;
    std::uint64_t seed = 0;
    Image truth;        ///< count-scaled ground truth
    Sinogram sinogram;  ///< Poisson-noisy counts
};

struct Dataset {
    Geometry geometry;
    double total_counts = 0.0;
    std::uint64_t seed = 0;
    std::vector<Sample> samples;
};

/// Seed for sample `id`, derived from the dataset seed only.
std::uint64_t sample_seed(std::uint64_t dataset_seed, int id);

/// One simulated pair: render, scale to counts, project, add Poisson noise.
Sample simulate_sample(const PhantomSpec& spec, const SystemMatrix& A, double total_counts, std::uint64_t seed,
                       int id = 0);

Dataset generate_dataset(const RandomizationLimits& limits, const DatasetConfig& cfg, const SystemMatrix& A);

/// Directory layout: manifest.csv (id,seed,image,sinogram), dataset.json
/// (geometry and counts) and per-sample CSV files.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace dnr
