#include "valvekit/metrics/surface.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>

namespace valvekit {

namespace {

#include "mc_tables.inc"

// Corner offsets and edge endpoints in the usual marching-cubes numbering.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

double SurfaceMesh::area() const {
    double s = 0.0;
    for (const auto& t : triangles) s += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    return s;
}

double SurfaceMesh::enclosed_volume() const {
    double s = 0.0;
    for (const auto& t : triangles) {
        s += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]]));
    }
    return s / 6.0;
}

void SurfaceMesh::validate() const {
    for (const auto& v : vertices) {
        if (!v.allFinite()) throw Error("mesh vertex is not finite");
    }
    const int n = static_cast<int>(vertices.size());
    for (const auto& t : triangles) {
        for (int i : t) {
            if (i < 0 || i >= n) throw Error("mesh triangle index out of range");
        }
        if (!(triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) > 0.0)) {
            throw Error("mesh has a degenerate triangle");
        }
    }
}

SurfaceMesh extract_surface(const BinaryMask& mask) {
    const auto& g = mask.geometry();
    Index3 lo{g.dims[0], g.dims[1], g.dims[2]};
    Index3 hi{-1, -1, -1};
    for (std::size_t idx = 0; idx < mask.size(); ++idx) {
        if (!mask[idx]) continue;
        const auto ijk = g.unravel(idx);
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], ijk[a]);
            hi[a] = std::max(hi[a], ijk[a]);
        }
    }
    SurfaceMesh mesh;
    if (hi[0] < 0) return mesh;

    auto value = [&](int i, int j, int k) { return mask.at_or(i, j, k, 0) != 0; };
    // Edge keys use indices shifted by one so the padding layer stays nonnegative.
    const std::uint64_t sx = static_cast<std::uint64_t>(g.dims[0]) + 2;
    const std::uint64_t sy = static_cast<std::uint64_t>(g.dims[1]) + 2;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    auto vertex_on = [&](int i, int j, int k, int axis) {
        const std::uint64_t key =
            (((static_cast<std::uint64_t>(k + 1) * sy) + static_cast<std::uint64_t>(j + 1)) * sx +
             static_cast<std::uint64_t>(i + 1)) * 3 + static_cast<std::uint64_t>(axis);
        auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<int>(mesh.vertices.size()));
        if (inserted) {
            Vec3 p(i, j, k);
            p[axis] += 0.5;
            mesh.vertices.push_back(g.to_physical(p));
        }
        return it->second;
    };

    for (int k = lo[2] - 1; k <= hi[2]; ++k) {
        for (int j = lo[1] - 1; j <= hi[1]; ++j) {
            for (int i = lo[0] - 1; i <= hi[0]; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    if (!value(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])) cube |= 1 << c;
                }
                if (cube == 0 || cube == 255) continue;
                const signed char* row = kTriTable[cube];
                for (int t = 0; row[t] != -1; t += 3) {
                    std::array<int, 3> tri{};
                    for (int v = 0; v < 3; ++v) {
                        const int e = row[t + v];
                        const int* c0 = kCorner[kEdge[e][0]];
                        const int* c1 = kCorner[kEdge[e][1]];
                        int axis = 0;
                        while (c0[axis] == c1[axis]) ++axis;
                        tri[v] = vertex_on(i + std::min(c0[0], c1[0]), j + std::min(c0[1], c1[1]),
                                           k + std::min(c0[2], c1[2]), axis);
                    }
                    const Vec3& a = mesh.vertices[tri[0]];
                    if (triangle_area(a, mesh.vertices[tri[1]], mesh.vertices[tri[2]]) > 1e-12) {
                        mesh.triangles.push_back(tri);
                    }
                }
            }
        }
    }
    // The table's winding is global; fix it once so normals face outward.
    if (mesh.enclosed_volume() < 0.0) {
        for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
    }
    return mesh;
}

SurfaceMesh extract_surface(const LabelVolume& v, LabelId id) {
    if (count_label(v, id) == 0) throw Error(fmt::format("empty label {}", label_name(id)));
    return extract_surface(label_mask(v, id));
}

void save_obj(const SurfaceMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& v : mesh.vertices) out << fmt::format("v {:.6f} {:.6f} {:.6f}\n", v[0], v[1], v[2]);
    for (const auto& t : mesh.triangles) {
        out << fmt::format("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
    }
}

}  // namespace valvekit
