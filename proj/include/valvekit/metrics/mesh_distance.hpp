#pragma once

#include <vector>

#include "valvekit/metrics/surface.hpp"

namespace valvekit {

/// Closest point to `p` on triangle (a, b, c).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Bounding-volume hierarchy over a mesh's triangles for exact nearest-surface
/// queries.
class TriangleBvh {
public:
    explicit TriangleBvh(const SurfaceMesh& mesh);

    /// Exact Euclidean distance from `p` to the nearest triangle.
    double distance(const Vec3& p) const;

private:
    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;  // children, or -1 for leaves
        int begin = 0, end = 0;     // triangle range for leaves
    };
    int build(int begin, int end);

    const SurfaceMesh& mesh_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// Distance from every vertex of `from` to the surface of `to`.
std::vector<double> directed_distances(const SurfaceMesh& from, const SurfaceMesh& to);

struct DistanceSummary {
    double mean = 0.0;
    /// Nearest-rank 95th percentile.
    double p95 = 0.0;
    std::size_t count = 0;
};

/// Pools both directed distance sets and summarizes them.
DistanceSummary symmetric_mesh_distance(const SurfaceMesh& a, const SurfaceMesh& b);

/// Nearest-rank percentile (q in (0, 100]) of an unsorted sample.
double nearest_rank_percentile(std::vector<double> values, double q);

}  // namespace valvekit
