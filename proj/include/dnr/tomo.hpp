#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dnr/errors.hpp"

namespace dnr {

/// Square activity map, row-major. Row 0 is the top of the image (largest y).
struct Image {
    int n = 0;
    std::vector<double> data;
    double pixel_size = 1.0;

    Image() = default;
    explicit Image(int side, double value = 0.0, double pixel = 1.0);

    double& at(int row, int col) { return data[static_cast<size_t>(row) * n + col]; }
    double at(int row, int col) const { return data[static_cast<size_t>(row) * n + col]; }
    size_t size() const { return data.size(); }
};

/// Projection counts, view-major: data[v * bins + d].
struct Sinogram {
    int views = 0;
    int bins = 0;
    std::vector<double> data;

    Sinogram() = default;
    Sinogram(int v, int d, double value = 0.0);

    double& at(int view, int bin) { return data[static_cast<size_t>(view) * bins + bin]; }
    double at(int view, int bin) const { return data[static_cast<size_t>(view) * bins + bin]; }
    size_t size() const { return data.size(); }
};

struct Geometry {
    int n = 0;
    int views = 0;
    int bins = 0;
    double arc = 0.0;
    double pixel_size = 1.0;
    std::vector<double> angles;

    /// Equispaced views over `arc`: angle_v = v * arc / views.
    static Geometry parallel(int n, int views, int bins, double arc, double pixel_size = 1.0);
    /// 24 views over 360 degrees, one detector bin per pixel column.
    static Geometry standard(int n, int views = 24);

    bool same_as(const Geometry& other) const;
};

/// Sparse CSR system matrix: row i = (view, bin), entries = ray/pixel intersection lengths.
class SystemMatrix {
public:
    struct Entry {
        std::uint32_t pixel;
        double weight;
    };

    SystemMatrix() = default;

    const Geometry& geometry() const { return geom_; }
    size_t rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
    size_t cols() const { return static_cast<size_t>(geom_.n) * geom_.n; }
    size_t nonzeros() const { return entries_.size(); }

    std::span<const Entry> row(size_t i) const {
        return {entries_.data() + row_ptr_[i], entries_.data() + row_ptr_[i + 1]};
    }
    std::span<const double> col_sums() const { return col_sums_; }

    bool structurally_equal(const SystemMatrix& other) const;

private:
    friend SystemMatrix build_system_matrix(const Geometry& geom);

    Geometry geom_;
    std::vector<size_t> row_ptr_;
    std::vector<Entry> entries_;
    std::vector<double> col_sums_;
};

SystemMatrix build_system_matrix(const Geometry& geom);

Sinogram forward_project(const SystemMatrix& A, const Image& f);
Image back_project(const SystemMatrix& A, const Sinogram& y);

/// Raw-array variants used by the network operator (no shape wrappers).
void forward_project(const SystemMatrix& A, std::span<const double> f, std::span<double> out);
void back_project(const SystemMatrix& A, std::span<const double> y, std::span<double> out);

/// Independent Poisson draws; element i depends only on (mean[i], seed, i).
Sinogram sample_poisson(const Sinogram& mean, std::uint64_t seed);

/// Returns c*f such that the projected counts sum to total_counts.
Image scale_to_counts(const Image& f, const SystemMatrix& A, double total_counts);

void check_image(const SystemMatrix& A, const Image& f);
void check_sinogram(const SystemMatrix& A, const Sinogram& y);

}  // namespace dnr
