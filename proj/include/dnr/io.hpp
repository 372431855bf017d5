#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "dnr/tomo.hpp"

namespace dnr::io {

// CSV layout: first line holds the dimensions ("n" or "views,bins"), then one
// image row (or one view) per line. Values use %.17g so reals round-trip exactly.

void write_image_csv(const std::filesystem::path& path, const Image& img);
Image read_image_csv(const std::filesystem::path& path);

void write_sinogram_csv(const std::filesystem::path& path, const Sinogram& sino);
Sinogram read_sinogram_csv(const std::filesystem::path& path);

/// 8-bit binary PGM (P5) after min-max normalization; constant input maps to 0.
void write_pgm(const std::filesystem::path& path, std::span<const double> values, int width,
               int height);
void write_image_pgm(const std::filesystem::path& path, const Image& img);
void write_sinogram_pgm(const std::filesystem::path& path, const Sinogram& sino);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dnr::io
