#pragma once

#include <filesystem>

#include "valvekit/core/volume.hpp"

namespace valvekit {

/// Supported on-disk volume formats, chosen by file extension:
/// `.nii` / `.nii.gz` (NIfTI-1, little-endian, single file) and `.mha`
/// (MetaImage, ASCII header with inline uncompressed data).
enum class VolumeFormat { Nifti, NiftiGz, MetaImage };

VolumeFormat format_from_path(const std::filesystem::path& path);

/// Reads a label map. Voxel data must be integral and every value a schema id.
LabelVolume load_volume(const std::filesystem::path& path);

/// Writes a label map as uint8. NIfTI stores geometry as float32, so the
/// round trip is exact for geometry representable in single precision;
/// MetaImage round-trips any double exactly.
void save_volume(const LabelVolume& v, const std::filesystem::path& path);

/// Reads a grayscale volume of any numeric datatype as float.
ScalarVolume load_image(const std::filesystem::path& path);
void save_image(const ScalarVolume& v, const std::filesystem::path& path);

/// Writes a 3-component float32 vector volume (NIfTI intent "vector" or a
/// 3-channel MetaImage). Components are given as three same-geometry scalars.
void save_vector_image(const ScalarVolume& x, const ScalarVolume& y,
                       const ScalarVolume& z, const std::filesystem::path& path);

}  // namespace valvekit
