#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "valvekit/core/volume.hpp"

namespace valvekit::test {

inline ImageGeometry cube_geometry(int n, double spacing = 1.0) {
    ImageGeometry g;
    g.dims = {n, n, n};
    g.spacing = Vec3::Constant(spacing);
    return g;
}

inline LabelVolume random_labels(const ImageGeometry& g, std::mt19937_64& rng, int max_id = kMaxLabelId) {
    std::uniform_int_distribution<int> pick(0, max_id);
    LabelVolume v(g);
    for (auto& x : v.data()) x = static_cast<LabelId>(pick(rng));
    return v;
}

inline BinaryMask random_mask(const ImageGeometry& g, std::mt19937_64& rng, double p = 0.5) {
    std::bernoulli_distribution on(p);
    BinaryMask m(g);
    for (auto& x : m.data()) x = on(rng) ? 1 : 0;
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("valvekit_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace valvekit::test
