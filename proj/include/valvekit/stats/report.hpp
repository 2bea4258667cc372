#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valvekit/morphometry/landmarks.hpp"
#include "valvekit/stats/statistics.hpp"
#include "valvekit/stats/temporal.hpp"

namespace valvekit {

enum class Measurement { GeometricCuspHeight, CommissuralAngle, AnnulusDiameter };

inline constexpr std::array<Measurement, 3> kMeasurements = {
    Measurement::GeometricCuspHeight, Measurement::CommissuralAngle, Measurement::AnnulusDiameter};

std::string_view measurement_title(Measurement m);
std::string_view measurement_unit(Measurement m);
double measurement_value(const MeasurementRecord& r, Measurement m);

/// Mean ± sd of |truth - prediction| with the paired t-test on the raw values.
struct DifferenceCell {
    SummaryStats abs_difference;
    TTestResult test;
};

struct DifferenceRow {
    std::string name;
    std::array<DifferenceCell, 3> cells;
};

/// Mean ± sd over segmentations of the largest inter-rater difference, with
/// the ICC of the segmentations x raters matrix.
struct RaterCell {
    SummaryStats max_difference;
    double icc = 0.0;
};

struct RaterRow {
    std::string name;
    std::array<RaterCell, 3> cells;
};

struct ComparisonReport {
    std::vector<DifferenceRow> table1;
    std::vector<RaterRow> table2;

    /// True when any cell rests on a degenerate statistic.
    bool degenerate() const;
};

/// Table 1 pairing unit: every segmentation (scan, frame), or the per-scan
/// means over frames.
enum class Pairing { PerSegmentation, PerScan };

/// Table 1 pairs ground-truth and predicted records per rater tag (untagged
/// records form an "Automated" row) on (scan, frame). Table 2 is built per
/// source from rater-tagged records when at least two raters are present.
ComparisonReport measurement_comparison(std::span<const MeasurementRecord> records,
                                        IccModel model = IccModel::Consistency31,
                                        Pairing pairing = Pairing::PerSegmentation);

enum class TableFormat { Markdown, Csv, Json };

TableFormat table_format_from_name(std::string_view name);

/// "2.07 ± 1.63 (p=0.1)": two decimals, p with trailing zeros dropped and
/// values below 0.005 shown as p<0.01.
std::string format_p_value(double p);
std::string format_difference_cell(const DifferenceCell& c);
std::string format_rater_cell(const RaterCell& c);

std::string render_table1(const ComparisonReport& r, TableFormat format);
std::string render_table2(const ComparisonReport& r, TableFormat format);

std::string render_orientation(const OrientationSummary& s, TableFormat format);

struct CurveDips {
    TemporalCurve curve;
    DipResult dips;
};

std::string render_temporal(std::span<const CurveDips> curves, TableFormat format);

std::string render_aggregate(std::span<const SummaryRow> rows, TableFormat format);

/// Frame/Dice series for external plotting, one row per curve point.
std::string render_plot_data(std::span<const TemporalCurve> curves);

}  // namespace valvekit
