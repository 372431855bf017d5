#include "dnr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace dnr::io {

namespace {

std::vector<double> parse_row(const std::string& line, const std::filesystem::path& path) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= line.size()) {
        size_t end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::string tok = line.substr(pos, end - pos);
        tok.erase(0, tok.find_first_not_of(" \t\r"));
        tok.erase(tok.find_last_not_of(" \t\r") + 1);
        if (tok.empty()) throw IoError(path.string() + ": empty CSV field");
        char* stop = nullptr;
        double v = std::strtod(tok.c_str(), &stop);
        if (stop != tok.c_str() + tok.size()) throw IoError(path.string() + ": bad number '" + tok + "'");
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(parse_row(line, path));
    }
    if (rows.empty()) throw IoError(path.string() + ": empty file");
    return rows;
}

void write_rows(std::ofstream& out, std::span<const double> values, int width) {
    char buf[32];
    for (size_t k = 0; k < values.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", values[k]);
        out << buf;
        out << (((k + 1) % static_cast<size_t>(width) == 0) ? '\n' : ',');
    }
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

int as_dim(double v, const std::filesystem::path& path) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e7) throw IoError(path.string() + ": bad dimension header");
    return static_cast<int>(v);
}

}  // namespace

void write_image_csv(const std::filesystem::path& path, const Image& img) {
    auto out = open_out(path);
    out << img.n << '\n';
    write_rows(out, img.data, img.n);
    if (!out) throw IoError("write failed: " + path.string());
}

Image read_image_csv(const std::filesystem::path& path) {
    auto rows = read_csv_rows(path);
    if (rows[0].size() != 1) throw IoError(path.string() + ": image header must be a single value n");
    const int n = as_dim(rows[0][0], path);
    if (rows.size() != static_cast<size_t>(n) + 1)
        throw IoError(path.string() + ": expected " + std::to_string(n) + " image rows");
    Image img(n);
    for (int r = 0; r < n; ++r) {
        if (rows[r + 1].size() != static_cast<size_t>(n)) throw IoError(path.string() + ": ragged row");
        std::copy(rows[r + 1].begin(), rows[r + 1].end(), img.data.begin() + static_cast<long>(r) * n);
    }
    return img;
}

void write_sinogram_csv(const std::filesystem::path& path, const Sinogram& sino) {
    auto out = open_out(path);
    out << sino.views << ',' << sino.bins << '\n';
    write_rows(out, sino.data, sino.bins);
    if (!out) throw IoError("write failed: " + path.string());
}

Sinogram read_sinogram_csv(const std::filesystem::path& path) {
    auto rows = read_csv_rows(path);
    if (rows[0].size() != 2) throw IoError(path.string() + ": sinogram header must be views,bins");
    const int views = as_dim(rows[0][0], path);
    const int bins = as_dim(rows[0][1], path);
    if (rows.size() != static_cast<size_t>(views) + 1)
        throw IoError(path.string() + ": expected " + std::to_string(views) + " sinogram rows");
    Sinogram s(views, bins);
    for (int v = 0; v < views; ++v) {
        if (rows[v + 1].size() != static_cast<size_t>(bins)) throw IoError(path.string() + ": ragged row");
        std::copy(rows[v + 1].begin(), rows[v + 1].end(), s.data.begin() + static_cast<long>(v) * bins);
    }
    return s;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> values, int width, int height) {
    auto out = open_out(path, true);
    out << "P5\n" << width << ' ' << height << "\n255\n";
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = (values.empty() ? 0.0 : *hi - *lo);
    std::vector<unsigned char> bytes(values.size(), 0);
    if (range > 0.0) {
        for (size_t k = 0; k < values.size(); ++k)
            bytes[k] = static_cast<unsigned char>(std::lround(255.0 * (values[k] - *lo) / range));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

void write_image_pgm(const std::filesystem::path& path, const Image& img) {
    write_pgm(path, img.data, img.n, img.n);
}

void write_sinogram_pgm(const std::filesystem::path& path, const Sinogram& sino) {
    write_pgm(path, sino.data, sino.bins, sino.views);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_out(path, true);
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dnr::io
