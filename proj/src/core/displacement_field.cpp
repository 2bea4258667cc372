#include "valvekit/core/displacement_field.hpp"

#include <algorithm>
#include <cmath>

namespace valvekit {

DisplacementField::DisplacementField(ImageGeometry geometry) : geometry_(std::move(geometry)) {
    geometry_.validate();
    for (auto& c : u_) c.assign(geometry_.voxel_count(), 0.0f);
}

Vec3 DisplacementField::sample(const Vec3& index) const {
    const auto& d = geometry_.dims;
    int i0[3];
    double w[3];
    for (int a = 0; a < 3; ++a) {
        const double x = std::clamp(index[a], 0.0, static_cast<double>(d[a] - 1));
        i0[a] = std::min(static_cast<int>(std::floor(x)), std::max(d[a] - 2, 0));
        w[a] = d[a] > 1 ? x - i0[a] : 0.0;
    }
    Vec3 out = Vec3::Zero();
    for (int dz = 0; dz < 2; ++dz) {
        const double wz = dz ? w[2] : 1.0 - w[2];
        if (wz == 0.0) continue;
        for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? w[1] : 1.0 - w[1];
            if (wy == 0.0) continue;
            for (int dx = 0; dx < 2; ++dx) {
                const double wx = dx ? w[0] : 1.0 - w[0];
                if (wx == 0.0) continue;
                const auto idx = geometry_.linear(i0[0] + dx, i0[1] + dy, i0[2] + dz);
                out += wx * wy * wz * at(idx);
            }
        }
    }
    return out;
}

double DisplacementField::max_norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, at(i).norm());
    return m;
}

bool DisplacementField::all_finite() const {
    for (const auto& c : u_) {
        for (float v : c) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

ScalarVolume DisplacementField::component_volume(int c) const {
    return ScalarVolume(geometry_, u_[c]);
}

LabelVolume pull_back_labels(const LabelVolume& seg, const DisplacementField& field) {
    require_same_geometry(seg.geometry(), field.geometry(), "label warp");
    const auto& g = seg.geometry();
    LabelVolume out(g);
    // index(x + u) = index(x) + R^T u / spacing
    const Mat3 to_index = g.spacing.cwiseInverse().asDiagonal() * g.direction.transpose();
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const auto idx = g.linear(i, j, k);
                const Vec3 q = Vec3(i, j, k) + to_index * field.at(idx);
                const int qi = static_cast<int>(std::lround(q[0]));
                const int qj = static_cast<int>(std::lround(q[1]));
                const int qk = static_cast<int>(std::lround(q[2]));
                out[idx] = seg.at_or(qi, qj, qk, 0);
            }
        }
    }
    return out;
}

}  // namespace valvekit
