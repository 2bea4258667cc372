#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace valvekit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index3 = std::array<int, 3>;

/// Voxel grid placement in physical (mm) space. The physical position of
/// continuous index i is origin + direction * (spacing ⊙ i); voxel centers sit
/// at integer indices. Data ordering is x-fastest.
struct ImageGeometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();
    Mat3 direction = Mat3::Identity();

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }

    std::size_t linear(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }

    Index3 unravel(std::size_t idx) const {
        const auto nx = static_cast<std::size_t>(dims[0]);
        const auto ny = static_cast<std::size_t>(dims[1]);
        return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
                static_cast<int>(idx / (nx * ny))};
    }

    bool contains(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }

    Vec3 to_physical(const Vec3& index) const {
        return origin + direction * spacing.cwiseProduct(index);
    }

    Vec3 to_physical(int i, int j, int k) const { return to_physical(Vec3(i, j, k)); }

    /// Continuous index of a physical point (direction is orthonormal).
    Vec3 to_index(const Vec3& p) const {
        return (direction.transpose() * (p - origin)).cwiseQuotient(spacing);
    }

    /// Spatial diagonal of one voxel in mm.
    double voxel_diagonal() const { return spacing.norm(); }

    /// Throws valvekit::Error when dims, spacing or direction are invalid.
    void validate() const;
};

/// Angle in degrees at the projection of `q` onto the plane (q, n) between
/// the projections of `a` and `b`. Returns a value in [0, 180].
double projected_angle_deg(const Vec3& a, const Vec3& b, const Vec3& q, const Vec3& n);

/// Exact equality of dims and geometry within `tol` (mm / unitless).
bool same_geometry(const ImageGeometry& a, const ImageGeometry& b, double tol = 1e-6);

/// Throws GeometryMismatch naming `what` when the grids differ.
void require_same_geometry(const ImageGeometry& a, const ImageGeometry& b,
                           const char* what);

}  // namespace valvekit
