#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "valvekit/core/volume.hpp"

namespace valvekit {

enum class Phase { Diastole, Systole };

std::string_view phase_name(Phase p);
/// Accepts "diastole"/"systole" in any case, or the single letters D/S.
std::optional<Phase> phase_from_name(std::string_view name);

/// One 3D time point. Reference frames always carry labels; other frames may
/// hold only a grayscale image until propagation fills in their labels.
struct Frame {
    std::optional<LabelVolume> labels;
    std::optional<ScalarVolume> image;
    std::optional<double> phase_percent;

    const ImageGeometry& geometry() const;
};

/// Ordered frames of one 4D scan with per-frame cardiac-phase tags.
struct Series4D {
    std::string scan_id;
    std::string patient_id;
    Fusion fusion = Fusion::LR;
    std::vector<Frame> frames;
    std::vector<Phase> phases;
    int reference_diastole = -1;
    int reference_systole = -1;

    std::size_t size() const { return frames.size(); }
    int reference_index(Phase p) const {
        return p == Phase::Diastole ? reference_diastole : reference_systole;
    }

    /// Throws when frames disagree on geometry, tags are missing, or a
    /// reference index is out of range or tagged with the other phase.
    void validate() const;
};

/// Indices of frames tagged with `phase`, in series order.
std::vector<int> phase_indices(const Series4D& series, Phase phase);

/// Label maps of the frames tagged with `phase`, order preserved. Throws when
/// a selected frame has no labels.
std::vector<LabelVolume> split_frames(const Series4D& series, Phase phase);

}  // namespace valvekit
