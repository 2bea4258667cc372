#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "valvekit/core/displacement_field.hpp"
#include "valvekit/core/series.hpp"

namespace valvekit {

/// Parameters of the synthetic aortic root. Lengths in mm, angles in degrees.
///
/// The root is a straight cylindrical wall around `outflow_axis`; the annulus
/// plane sits at axial height 0, the LVO band just below the wall and the STJ
/// band on top. Each cusp is a ruled sheet spanning its angular sector.
struct PhantomSpec {
    double annulus_diameter = 24.0;
    double root_height = 20.0;
    double wall_thickness = 2.0;
    double cusp_geometric_height = 14.0;
    /// Angle at the axis between the non-fused cusp's commissures. Must be
    /// 120 for Tricuspid.
    double commissural_angle = 160.0;
    Fusion fusion = Fusion::LR;
    /// One entry per frame; 0 is closed, 1 fully open. Frames with
    /// open_fraction <= 0.5 are tagged Diastole, the rest Systole.
    std::vector<double> open_fraction{0.0, 0.0, 1.0, 1.0};
    Vec3 spacing = Vec3::Constant(0.5);
    Vec3 outflow_axis = Vec3::UnitZ();
    /// RMS boundary jitter in voxels (0 disables).
    double noise = 0.0;
    std::uint64_t noise_seed = 1;

    double cusp_thickness = 3.0;
    /// Free-margin distance from the axis when closed, from the wall when open.
    double coaptation_gap = 2.5;
    double open_gap = 3.0;
    double band_thickness = 1.0;
    double lvo_depth = 2.0;

    /// Peak inter-frame displacement in mm within the root's bounding
    /// cylinder; reference frames are undeformed.
    double motion_amplitude = 2.0;
    std::uint64_t motion_seed = 7;

    /// Fixed grid size; when absent the grid is sized to the root plus margin.
    std::optional<Index3> grid_dims;
    int margin_voxels = 4;

    std::string scan_id = "phantom";
    std::string patient_id = "phantom";

    /// Throws Error describing the first violated constraint.
    void validate() const;
};

/// Rigid-twist motion of one frame: points rotate about the axis by
/// twist * (axial height) radians, then shift by `translation` (mm).
struct FrameMotion {
    double twist = 0.0;
    Vec3 translation = Vec3::Zero();
};

struct CommissureTruth {
    Vec3 point;
    std::pair<Structure, Structure> cusps;
};

/// Continuous-model landmarks and measurements of one frame.
struct FrameTruth {
    Phase phase = Phase::Diastole;
    double open_fraction = 0.0;
    FrameMotion motion;
    Vec3 nadir;
    Vec3 free_margin_center;
    std::vector<CommissureTruth> commissures;
    Vec3 annulus_point;
    Vec3 annulus_normal;
    Vec3 opposite_wall_point;
    double annulus_diameter = 0.0;
    double geometric_cusp_height = 0.0;
    double commissural_angle = 0.0;
    Vec3 outflow_axis;
};

struct PhantomTruth {
    Fusion fusion = Fusion::LR;
    Structure non_fused = Structure::NCusp;
    /// Axis point at the annulus plane in the undeformed frame.
    Vec3 center;
    Vec3 axis;
    std::vector<FrameTruth> frames;

    /// Exact pull-back field taking the phase reference of frame `t` onto
    /// frame t: frame_t(x) = reference(x + u(x)) for equal open fractions.
    DisplacementField pullback_field(std::size_t t, const ImageGeometry& g) const;
};

struct Phantom {
    Series4D series;
    PhantomTruth truth;
};

Phantom generate_phantom(const PhantomSpec& spec);

/// Pull-back resampling of a label frame through `field` (nearest neighbour,
/// background outside the grid).
LabelVolume apply_synthetic_deformation(const LabelVolume& frame, const DisplacementField& field);

/// Half the spacing diagonal.
double voxelization_error_bound(const PhantomSpec& spec);

}  // namespace valvekit
