#pragma once

#include <span>
#include <string>
#include <vector>

#include "valvekit/core/series.hpp"
#include "valvekit/metrics/evaluate.hpp"

namespace valvekit {

/// Dice of one label across the frames of a scan, in frame order.
struct TemporalCurve {
    std::string scan_id;
    Structure label = Structure::LCusp;
    std::vector<int> frames;
    std::vector<double> dice;
    std::vector<Phase> phases;

    std::size_t size() const { return dice.size(); }
};

/// One curve per scored structure comparing every frame of `pred` to `truth`.
std::vector<TemporalCurve> temporal_curves(const Series4D& truth, const Series4D& pred);

/// Curves rebuilt from metric records, one per (scan, label), frames sorted.
std::vector<TemporalCurve> curves_from_records(std::span<const MetricRecord> records);

struct DipResult {
    /// Positions (indices into the curve) whose Dice falls more than z sample
    /// standard deviations below the mean of the other same-phase frames.
    std::vector<int> dips;
    /// Positions whose phase has fewer than two other frames to compare with.
    std::vector<int> unevaluable;
};

DipResult detect_dips(const TemporalCurve& curve, double z = 2.0);

}  // namespace valvekit
