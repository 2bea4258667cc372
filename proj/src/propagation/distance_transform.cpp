#include <algorithm>
#include <cmath>
#include <vector>

#include "valvekit/propagation/registration.hpp"

namespace valvekit {

namespace {

constexpr double kFar = 1e20;

// Felzenszwalb & Huttenlocher lower envelope of parabolas, with squared
// sample spacing w: out[p] = min_q w (p - q)^2 + f[q].
void edt_1d(const std::vector<double>& f, std::vector<double>& out, double w,
            std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + w * q * q) - (f[p] + w * p * p)) / (2.0 * w * (q - p));
            if (s <= z[k] && k > 0) {
                --k;
            } else {
                break;
            }
        }
        if (s <= z[k]) {
            // k == 0 and the new parabola dominates everywhere.
            v[0] = q;
            z[0] = -kFar;
            z[1] = kFar;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kFar;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double d = q - v[k];
        out[q] = w * d * d + f[v[k]];
    }
}

// Squared distance (mm^2) from every voxel to the nearest voxel with seed != 0.
std::vector<double> squared_distance(const BinaryMask& mask, bool to_foreground) {
    const auto& g = mask.geometry();
    std::vector<double> d(mask.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const bool seed = (mask[i] != 0) == to_foreground;
        d[i] = seed ? 0.0 : kFar;
    }
    std::vector<double> line, out;
    std::vector<int> v;
    std::vector<double> z;
    for (int axis = 0; axis < 3; ++axis) {
        const int n = g.dims[axis];
        const double w = g.spacing[axis] * g.spacing[axis];
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        line.resize(n);
        out.resize(n);
        for (int y = 0; y < g.dims[a2]; ++y) {
            for (int x = 0; x < g.dims[a1]; ++x) {
                Index3 ijk{};
                ijk[a1] = x;
                ijk[a2] = y;
                for (int t = 0; t < n; ++t) {
                    ijk[axis] = t;
                    line[t] = d[g.linear(ijk[0], ijk[1], ijk[2])];
                }
                edt_1d(line, out, w, v, z);
                for (int t = 0; t < n; ++t) {
                    ijk[axis] = t;
                    d[g.linear(ijk[0], ijk[1], ijk[2])] = std::min(out[t], kFar);
                }
            }
        }
    }
    return d;
}

}  // namespace

ScalarVolume signed_distance(const BinaryMask& mask, double clamp) {
    const auto to_fg = squared_distance(mask, true);
    const auto to_bg = squared_distance(mask, false);
    ScalarVolume out(mask.geometry());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = std::sqrt(to_fg[i]) - std::sqrt(to_bg[i]);
        out[i] = static_cast<float>(std::clamp(s, -clamp, clamp));
    }
    return out;
}

std::vector<ScalarVolume> distance_channels(const LabelVolume& v, double clamp) {
    std::vector<ScalarVolume> out;
    for (auto s : kAllStructures) out.push_back(signed_distance(label_mask(v, to_id(s)), clamp));
    return out;
}

}  // namespace valvekit
