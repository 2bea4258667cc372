#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "valvekit/core/displacement_field.hpp"
#include "valvekit/core/series.hpp"

namespace valvekit {

struct RegistrationConfig {
    int n_levels = 3;
    /// Iterations per level, coarsest level first.
    std::vector<int> iterations{100, 60, 30};
    double sigma_fluid = 2.0;    // mm, smoothing of each update
    double sigma_elastic = 1.0;  // mm, smoothing of the accumulated field
    /// Scales the maximum per-iteration step (half a voxel at 1.0).
    double step_scale = 1.0;
    /// Stop a level once the mean update magnitude falls below this (mm).
    double tolerance = 0.01;
    /// Clamp of the signed-distance channels built from label maps (mm).
    double distance_clamp = 5.0;
    /// Frames registered concurrently by propagate_phase.
    int threads = 1;

    void validate() const;
};

RegistrationConfig load_registration_config(const std::filesystem::path& path);

/// Signed Euclidean distance to the mask boundary in mm (negative inside),
/// honoring anisotropic spacing, clamped to [-clamp, clamp].
ScalarVolume signed_distance(const BinaryMask& mask, double clamp);

/// One clamped signed-distance channel per structure label.
std::vector<ScalarVolume> distance_channels(const LabelVolume& v, double clamp);

/// Demons registration of channel stacks. The returned field u satisfies
/// moving(x + u(x)) ≈ fixed(x), so it pulls moving-space content back onto
/// the fixed grid.
DisplacementField register_deformable(const std::vector<ScalarVolume>& fixed,
                                      const std::vector<ScalarVolume>& moving,
                                      const RegistrationConfig& cfg);

DisplacementField register_deformable(const LabelVolume& fixed, const LabelVolume& moving,
                                      const RegistrationConfig& cfg);

DisplacementField register_deformable(const ScalarVolume& fixed, const ScalarVolume& moving,
                                      const RegistrationConfig& cfg);

/// out(x) = seg(x + u(x)) with nearest-neighbour lookup; background outside.
LabelVolume warp_labels(const LabelVolume& seg, const DisplacementField& field);

struct FrameFailure {
    int frame = 0;
    std::string message;
};

struct PropagationResult {
    Series4D series;
    /// Pull-back fields indexed like `series.frames`; empty for frames that
    /// were not registered.
    std::vector<DisplacementField> fields;
    std::vector<FrameFailure> failures;
};

class PropagationError : public Error {
public:
    PropagationError(std::string what, PropagationResult partial)
        : Error(std::move(what)), partial_(std::move(partial)) {}
    const PropagationResult& partial() const { return partial_; }

private:
    PropagationResult partial_;
};

/// Labels every frame of `phase` by registering it (fixed) to the phase
/// reference (moving) and warping the reference labels. Grayscale images are
/// used when both frames carry one, label distance channels otherwise. The
/// reference passes through unchanged. Throws PropagationError after all
/// frames were attempted if any failed.
PropagationResult propagate_phase(const Series4D& series, Phase phase,
                                  const RegistrationConfig& cfg = {});

}  // namespace valvekit
