#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "valvekit/core/error.hpp"
#include "valvekit/core/geometry.hpp"
#include "valvekit/core/label_schema.hpp"

namespace valvekit {

/// Dense 3D voxel array with physical geometry. The tag keeps label maps,
/// masks and intensity images from being mixed up at compile time.
template <typename T, typename Tag>
class Volume {
public:
    using value_type = T;

    Volume() = default;

    explicit Volume(ImageGeometry geometry, T fill = T{})
        : geometry_(std::move(geometry)), data_(geometry_.voxel_count(), fill) {
        geometry_.validate();
    }

    Volume(ImageGeometry geometry, std::vector<T> data)
        : geometry_(std::move(geometry)), data_(std::move(data)) {
        geometry_.validate();
        if (data_.size() != geometry_.voxel_count()) {
            throw Error("volume data length does not match dims");
        }
    }

    const ImageGeometry& geometry() const { return geometry_; }
    const Index3& dims() const { return geometry_.dims; }
    std::size_t size() const { return data_.size(); }

    std::span<const T> data() const { return data_; }
    std::span<T> data() { return data_; }

    T operator[](std::size_t idx) const { return data_[idx]; }
    T& operator[](std::size_t idx) { return data_[idx]; }

    T at(int i, int j, int k) const { return data_[geometry_.linear(i, j, k)]; }
    T& at(int i, int j, int k) { return data_[geometry_.linear(i, j, k)]; }

    /// Value at (i,j,k), or `outside` when the index leaves the grid.
    T at_or(int i, int j, int k, T outside) const {
        return geometry_.contains(i, j, k) ? at(i, j, k) : outside;
    }

    friend bool operator==(const Volume& a, const Volume& b) {
        return same_geometry(a.geometry_, b.geometry_, 0.0) && a.data_ == b.data_;
    }

private:
    ImageGeometry geometry_;
    std::vector<T> data_;
};

struct LabelTag {};
struct MaskTag {};
struct ScalarTag {};

/// Multi-label valve segmentation; every voxel holds a schema id.
using LabelVolume = Volume<LabelId, LabelTag>;
/// Binary indicator, 0 or 1 per voxel.
using BinaryMask = Volume<std::uint8_t, MaskTag>;
/// Grayscale frame or a single channel of a registration stack.
using ScalarVolume = Volume<float, ScalarTag>;

/// Throws Error "unknown label id N" (with count and first coordinate) when a
/// voxel falls outside the schema.
void validate_labels(const LabelVolume& v);

/// Voxel-wise indicator of `id`. Throws for ids outside the schema.
BinaryMask label_mask(const LabelVolume& v, LabelId id);

std::size_t count_label(const LabelVolume& v, LabelId id);

/// Mean physical coordinate (mm) of all voxel centers carrying `id`.
/// Throws Error "empty label <name>" when no voxel has that id.
Vec3 centroid_mm(const LabelVolume& v, LabelId id);

}  // namespace valvekit
