#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "valvekit/core/volume.hpp"

namespace valvekit {

struct MorphometryConfig {
    /// Fraction of extremal points averaged for the nadir and free-margin
    /// centers.
    double extreme_fraction = 0.05;
    /// Measure the annulus diameter to the outer wall surface instead of the
    /// lumen side.
    bool outer_wall = false;
    /// Ray-march step as a fraction of the smallest voxel spacing.
    double ray_step = 0.25;
};

struct CuspLandmarks {
    Structure cusp = Structure::LCusp;
    Vec3 nadir_center = Vec3::Zero();
    Vec3 free_margin_center = Vec3::Zero();
    /// Cusp voxel centers touching RootWall or LVO (mm).
    std::vector<Vec3> attachment;
    /// The lowest attachment points averaged into nadir_center.
    std::vector<Vec3> nadir_region;
};

struct Commissure {
    Vec3 point = Vec3::Zero();
    std::pair<Structure, Structure> cusps;

    bool touches(Structure s) const { return cusps.first == s || cusps.second == s; }
};

struct ValveLandmarks {
    Vec3 outflow_axis = Vec3::UnitZ();
    Vec3 plane_point = Vec3::Zero();
    /// Unit normal of the annulus plane, pointing toward the STJ.
    Vec3 plane_normal = Vec3::UnitZ();
    Vec3 annulus_center = Vec3::Zero();
    std::vector<CuspLandmarks> cusps;
    std::vector<Commissure> commissures;
    Structure non_fused = Structure::NCusp;

    const CuspLandmarks& cusp(Structure s) const;
    std::vector<Commissure> commissures_of(Structure s) const;
};

/// Locates the anchor points of the measurement protocol from a label map.
ValveLandmarks extract_landmarks(const LabelVolume& v, Fusion fusion,
                                 const MorphometryConfig& cfg = {});

/// Distance from the non-fused cusp's nadir center to its free-margin center.
double geometric_cusp_height(const ValveLandmarks& lm);

/// Nadir of the non-fused cusp to the opposite root wall, along a ray in the
/// annulus plane through the annulus center.
double annulus_diameter(const ValveLandmarks& lm, const LabelVolume& v,
                        const MorphometryConfig& cfg = {});

/// Angle at the annulus center between the non-fused cusp's commissures,
/// projected onto the annulus plane. In (0, 180].
double commissural_angle(const ValveLandmarks& lm);

enum class MeasurementSource { GroundTruth, Predicted };

std::string_view source_name(MeasurementSource s);
std::optional<MeasurementSource> source_from_name(std::string_view name);

struct MeasurementRecord {
    std::string scan_id;
    int frame = 0;
    double geometric_cusp_height = 0.0;
    double annulus_diameter = 0.0;
    double commissural_angle = 0.0;
    MeasurementSource source = MeasurementSource::GroundTruth;
    std::optional<std::string> rater;
};

MeasurementRecord measure_frame(const LabelVolume& v, Fusion fusion, const std::string& scan_id = {},
                                int frame = 0,
                                MeasurementSource source = MeasurementSource::GroundTruth,
                                const MorphometryConfig& cfg = {});

/// Landmarks as a JSON point set (labelled points in mm).
std::string landmarks_to_json(const ValveLandmarks& lm);

}  // namespace valvekit
