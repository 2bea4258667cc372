#pragma once

#include <array>
#include <vector>

#include "valvekit/core/volume.hpp"

namespace valvekit {

/// Dense vector field u(x) in physical mm on a voxel grid, defining the map
/// phi(x) = x + u(x). Components are stored per axis of physical space.
class DisplacementField {
public:
    DisplacementField() = default;
    explicit DisplacementField(ImageGeometry geometry);

    const ImageGeometry& geometry() const { return geometry_; }
    std::size_t size() const { return u_[0].size(); }

    std::vector<float>& component(int c) { return u_[c]; }
    const std::vector<float>& component(int c) const { return u_[c]; }

    Vec3 at(std::size_t idx) const { return {u_[0][idx], u_[1][idx], u_[2][idx]}; }
    void set(std::size_t idx, const Vec3& v) {
        for (int c = 0; c < 3; ++c) u_[c][idx] = static_cast<float>(v[c]);
    }

    /// Trilinear value at continuous voxel index, clamped to the grid.
    Vec3 sample(const Vec3& index) const;

    double max_norm() const;
    bool all_finite() const;

    /// Component c as a scalar volume (for file export).
    ScalarVolume component_volume(int c) const;

private:
    ImageGeometry geometry_;
    std::array<std::vector<float>, 3> u_;
};

/// Pull-back of a label map through `field`: out(x) = seg(x + u(x)) with
/// nearest-neighbour lookup; samples leaving the grid become background.
LabelVolume pull_back_labels(const LabelVolume& seg, const DisplacementField& field);

}  // namespace valvekit
