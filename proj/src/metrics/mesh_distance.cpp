#include "valvekit/metrics/mesh_distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace valvekit {

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    }
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

TriangleBvh::TriangleBvh(const SurfaceMesh& mesh) : mesh_(mesh) {
    if (mesh.triangles.empty()) throw Error("empty mesh");
    order_.resize(mesh.triangles.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * order_.size());
    build(0, static_cast<int>(order_.size()));
}

int TriangleBvh::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i = begin; i < end; ++i) {
        for (int v : mesh_.triangles[order_[i]]) {
            lo = lo.cwiseMin(mesh_.vertices[v]);
            hi = hi.cwiseMax(mesh_.vertices[v]);
        }
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= 4) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    auto centroid = [&](int t) {
        const auto& tri = mesh_.triangles[t];
        return mesh_.vertices[tri[0]][axis] + mesh_.vertices[tri[1]][axis] +
               mesh_.vertices[tri[2]][axis];
    };
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int x, int y) { return centroid(x) < centroid(y); });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

double TriangleBvh::distance(const Vec3& p) const {
    auto box_d2 = [&](const Node& n) {
        const Vec3 d = (n.lo - p).cwiseMax(p - n.hi).cwiseMax(0.0);
        return d.squaredNorm();
    };
    double best = std::numeric_limits<double>::infinity();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& n = nodes_[stack[--top]];
        if (box_d2(n) > best) continue;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                const auto& t = mesh_.triangles[order_[i]];
                const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[t[0]],
                                                         mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
                best = std::min(best, (q - p).squaredNorm());
            }
            continue;
        }
        const double dl = box_d2(nodes_[n.left]);
        const double dr = box_d2(nodes_[n.right]);
        // Push the farther child first so the nearer one is visited next.
        if (dl < dr) {
            stack[top++] = n.right;
            stack[top++] = n.left;
        } else {
            stack[top++] = n.left;
            stack[top++] = n.right;
        }
    }
    return std::sqrt(best);
}

std::vector<double> directed_distances(const SurfaceMesh& from, const SurfaceMesh& to) {
    if (from.vertices.empty()) throw Error("empty mesh");
    const TriangleBvh bvh(to);
    std::vector<double> out;
    out.reserve(from.vertices.size());
    for (const auto& v : from.vertices) out.push_back(bvh.distance(v));
    return out;
}

double nearest_rank_percentile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

DistanceSummary symmetric_mesh_distance(const SurfaceMesh& a, const SurfaceMesh& b) {
    if (a.empty() || b.empty()) throw Error("empty mesh");
    auto d = directed_distances(a, b);
    const auto back = directed_distances(b, a);
    d.insert(d.end(), back.begin(), back.end());
    DistanceSummary s;
    s.count = d.size();
    // Sorted summation keeps the mean independent of argument order.
    std::sort(d.begin(), d.end());
    double sum = 0.0;
    for (double x : d) sum += x;
    s.mean = sum / static_cast<double>(d.size());
    s.p95 = nearest_rank_percentile(std::move(d), 95.0);
    return s;
}

}  // namespace valvekit
