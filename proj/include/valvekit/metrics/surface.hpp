#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "valvekit/core/volume.hpp"

namespace valvekit {

/// Triangle mesh in physical mm. Triangles are wound counter-clockwise seen
/// from outside, so enclosed_volume() is positive for closed surfaces.
struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }
    double area() const;
    /// Signed volume by the divergence theorem; meaningful for closed meshes.
    double enclosed_volume() const;
    /// Throws when an index is out of range, a vertex is non-finite or a
    /// triangle has zero area.
    void validate() const;
};

/// Marching-cubes isosurface of the mask at level 0.5. Vertices on shared
/// cube edges are welded, so closed components come out watertight.
SurfaceMesh extract_surface(const BinaryMask& mask);

/// Surface of label `id`. Throws Error "empty label <name>" when absent.
SurfaceMesh extract_surface(const LabelVolume& v, LabelId id);

/// Wavefront OBJ dump for inspection.
void save_obj(const SurfaceMesh& mesh, const std::filesystem::path& path);

}  // namespace valvekit
