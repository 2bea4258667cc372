#pragma once

#include <string>
#include <vector>

#include "valvekit/core/series.hpp"

namespace valvekit {

struct OrientationResult {
    double offset_angle = 0.0;  // degrees in [0, 180]
    bool flipped = false;       // angle > 90
};

/// Angle between the LVO→STJ centroid vectors of the two maps.
OrientationResult outflow_orientation(const LabelVolume& pred, const LabelVolume& truth);

struct MetricRecord {
    std::string scan_id;
    int frame = 0;
    Phase phase = Phase::Diastole;
    Structure label = Structure::LCusp;
    double dice = 0.0;
    bool both_empty = false;
    double mean_sym_dist = 0.0;
    double p95_sym_dist = 0.0;
};

struct FrameEvaluation {
    std::vector<MetricRecord> records;
    OrientationResult orientation;
};

/// Dice and symmetric surface distance for the three cusps and the root wall,
/// plus outflow orientation. Errors name the volume and label at fault.
FrameEvaluation evaluate_frame(const LabelVolume& pred, const LabelVolume& truth,
                               const std::string& scan_id = {}, int frame = 0,
                               Phase phase = Phase::Diastole);

}  // namespace valvekit
