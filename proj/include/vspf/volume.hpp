#pragma once

#include "vspf/types.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace vspf {

/// Voxel lattice with physical placement. Voxel (i, j, k) sits at
/// origin + (i, j, k) * spacing (componentwise), data is x-fastest.
struct Grid {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();

    std::size_t size() const
    {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) +
                                                    static_cast<std::size_t>(dims[1]) * k);
    }
    std::array<int, 3> coords(std::size_t linear) const;
    Vec3 physical(std::size_t linear) const;
    Vec3 physical(int i, int j, int k) const
    {
        return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
    }
    /// Continuous voxel coordinates of a physical point.
    Vec3 continuous_index(const Vec3& point) const
    {
        return (point - origin).cwiseQuotient(spacing);
    }
    /// Physical center of the voxel lattice.
    Vec3 center() const;
    /// Radius of the sphere through the lattice corners, about center().
    double bounding_radius() const;

    bool operator==(const Grid&) const = default;
};

void validate(const Grid& grid);

class Volume {
public:
    Volume() = default;
    Volume(Grid grid, std::vector<double> data);
    /// Volume filled with a constant.
    Volume(Grid grid, double value);

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return data_.size(); }
    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(int i, int j, int k) const { return data_[grid_.index(i, j, k)]; }
    double& at(int i, int j, int k) { return data_[grid_.index(i, j, k)]; }

    double min() const;
    double max() const;

    bool operator==(const Volume&) const = default;

private:
    Grid grid_;
    std::vector<double> data_;
};

/// Three partial derivatives per voxel, intensity per mm.
class VectorField {
public:
    VectorField() = default;
    VectorField(Grid grid, std::vector<Vec3> data);

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return data_.size(); }
    const Vec3& operator[](std::size_t i) const { return data_[i]; }
    std::span<const Vec3> data() const { return data_; }

    /// Trilinear interpolation at a continuous voxel index; returns false and
    /// leaves `out` untouched when the point falls outside the lattice.
    bool interpolate(const Vec3& continuous_index, Vec3& out) const;

private:
    Grid grid_;
    std::vector<Vec3> data_;
};

/// Multi-scale stack. Level 1 is the input, each further level halves the
/// resolution.
class Pyramid {
public:
    explicit Pyramid(std::vector<Volume> levels);

    int level_count() const { return static_cast<int>(levels_.size()); }
    /// 1-based, 1 = finest.
    const Volume& level(int k) const;

private:
    std::vector<Volume> levels_;
};

// MetaImage (.mhd + raw) I/O.
Volume load_volume(const std::filesystem::path& path);
/// Writes `<stem>.mhd` and `<stem>.raw` as little-endian doubles (MET_DOUBLE).
void save_volume(const Volume& volume, const std::filesystem::path& path);
/// Same, storing 32-bit floats (used for probability exports).
void save_volume_float(const Volume& volume, const std::filesystem::path& path);

/// Catmull-Rom (a = -0.5) sample at a continuous voxel index, edges clamped.
double sample_cubic(const Volume& volume, const Vec3& continuous_index);
/// Trilinear sample at a continuous voxel index, edges clamped.
double sample_linear(const Volume& volume, const Vec3& continuous_index);

Volume resample_isotropic(const Volume& volume, double target_spacing);
Volume gaussian_smooth(const Volume& volume, double sigma_mm);
VectorField spatial_gradient(const Volume& volume);
Pyramid build_pyramid(const Volume& volume, int levels);

/// Every second voxel per axis, starting at index 0.
Volume decimate(const Volume& volume);

}  // namespace vspf
