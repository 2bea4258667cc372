#include "valvekit/core/volume.hpp"

#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include <fmt/format.h>

namespace valvekit {

void ImageGeometry::validate() const {
    for (int d = 0; d < 3; ++d) {
        if (dims[d] <= 0) throw Error(fmt::format("dims[{}] must be positive", d));
        if (!(spacing[d] > 0.0) || !std::isfinite(spacing[d])) {
            throw Error(fmt::format("spacing[{}] must be positive", d));
        }
        if (!std::isfinite(origin[d])) throw Error("origin must be finite");
    }
    const Mat3 gram = direction.transpose() * direction;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        throw Error("direction matrix is not orthonormal");
    }
}

double projected_angle_deg(const Vec3& a, const Vec3& b, const Vec3& q, const Vec3& n) {
    const Vec3 nn = n.normalized();
    const Vec3 va = (a - q) - (a - q).dot(nn) * nn;
    const Vec3 vb = (b - q) - (b - q).dot(nn) * nn;
    return std::atan2(va.cross(vb).norm(), va.dot(vb)) * 180.0 / M_PI;
}

bool same_geometry(const ImageGeometry& a, const ImageGeometry& b, double tol) {
    if (a.dims != b.dims) return false;
    if ((a.spacing - b.spacing).cwiseAbs().maxCoeff() > tol) return false;
    if ((a.origin - b.origin).cwiseAbs().maxCoeff() > tol) return false;
    if ((a.direction - b.direction).cwiseAbs().maxCoeff() > tol) return false;
    return true;
}

void require_same_geometry(const ImageGeometry& a, const ImageGeometry& b,
                           const char* what) {
    if (!same_geometry(a, b)) {
        throw GeometryMismatch(fmt::format(
            "geometry mismatch in {}: dims {}x{}x{} vs {}x{}x{}", what, a.dims[0],
            a.dims[1], a.dims[2], b.dims[0], b.dims[1], b.dims[2]));
    }
}

void validate_labels(const LabelVolume& v) {
    std::size_t bad = 0;
    std::size_t first = 0;
    int first_value = 0;
    const auto data = v.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!is_valid_label(data[i])) {
            if (bad == 0) {
                first = i;
                first_value = data[i];
            }
            ++bad;
        }
    }
    if (bad > 0) {
        const auto ijk = v.geometry().unravel(first);
        throw Error(fmt::format("unknown label id {} ({} voxels, first at [{}, {}, {}])",
                                first_value, bad, ijk[0], ijk[1], ijk[2]));
    }
}

BinaryMask label_mask(const LabelVolume& v, LabelId id) {
    if (!is_valid_label(id)) throw Error(fmt::format("unknown label id {}", id));
    BinaryMask mask(v.geometry());
    const auto src = v.data();
    auto dst = mask.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == id ? 1 : 0;
    return mask;
}

std::size_t count_label(const LabelVolume& v, LabelId id) {
    std::size_t n = 0;
    for (auto x : v.data()) n += (x == id);
    return n;
}

Vec3 centroid_mm(const LabelVolume& v, LabelId id) {
    const auto& g = v.geometry();
    Vec3 sum = Vec3::Zero();
    std::size_t n = 0;
    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i, ++idx) {
                if (v[idx] == id) {
                    sum += Vec3(i, j, k);
                    ++n;
                }
            }
        }
    }
    if (n == 0) throw Error(fmt::format("empty label {}", label_name(id)));
    return g.to_physical(sum / static_cast<double>(n));
}

}  // namespace valvekit
