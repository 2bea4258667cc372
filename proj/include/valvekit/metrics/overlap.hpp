#pragma once

#include <span>

#include "valvekit/core/volume.hpp"

namespace valvekit {

struct DiceResult {
    double value = 0.0;
    /// Both masks were empty; value is then 1.0 by convention.
    bool both_empty = false;
};

/// 2|a∩b| / (|a|+|b|). Throws GeometryMismatch for different grids.
DiceResult dice(const BinaryMask& a, const BinaryMask& b);

/// Dice of one label id between two label maps.
DiceResult dice(const LabelVolume& a, const LabelVolume& b, LabelId id);

/// Per-voxel modal label over at least two same-geometry maps; ties go to the
/// smallest label id.
LabelVolume majority_vote(std::span<const LabelVolume> preds);

}  // namespace valvekit
