#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "valvekit/core/series.hpp"
#include "valvekit/metrics/evaluate.hpp"

namespace valvekit {

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

/// Student t cumulative distribution with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

enum class Degeneracy { None, ZeroVariance, NoDifference };

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    int dof = 0;
    double mean_difference = 0.0;
    /// ZeroVariance: constant nonzero differences (p = 0). NoDifference: all
    /// differences zero (t = 0, p = 1).
    Degeneracy degeneracy = Degeneracy::None;
};

/// Two-tailed paired t-test on d = a - b.
TTestResult paired_t_test(std::span<const std::pair<double, double>> pairs);
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

enum class IccModel {
    Consistency31,  // two-way mixed, single rater, consistency
    Agreement21,    // two-way random, single rater, absolute agreement
};

struct RaterMatrix {
    int targets = 0;
    int raters = 0;
    std::vector<double> values;  // row-major, targets x raters

    double operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * raters + j]; }
};

struct AnovaTable {
    double ms_rows = 0.0;
    double ms_cols = 0.0;
    double ms_error = 0.0;
};

/// Two-way ANOVA without interaction. Residual sums below rounding level
/// (1e-12 of the total) are reported as exactly zero.
AnovaTable two_way_anova(const RaterMatrix& m);

double icc(const RaterMatrix& m, IccModel model = IccModel::Consistency31);
inline double icc_consistency(const RaterMatrix& m) { return icc(m, IccModel::Consistency31); }

struct SummaryStats {
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
    int n = 0;
    /// Set when n = 1 and the sample sd is undefined (reported as 0).
    bool sd_undefined = false;
};

SummaryStats summarize(std::span<const double> values);

struct GroupBy {
    bool scan = false;
    bool label = false;
    bool phase = false;
    bool frame = false;
};

/// Parses a comma-separated list of scan, label, phase, frame.
GroupBy parse_group_by(const std::string& spec);

struct SummaryRow {
    std::optional<std::string> scan_id;
    std::optional<Structure> label;
    std::optional<Phase> phase;
    std::optional<int> frame;
    SummaryStats dice;
    SummaryStats mean_sym_dist;
    SummaryStats p95_sym_dist;
};

/// Summary rows ordered by scan, frame, label, phase.
std::vector<SummaryRow> aggregate(std::span<const MetricRecord> records, const GroupBy& group_by);

struct OrientationSummary {
    SummaryStats angle;
    bool any_flipped = false;
};

OrientationSummary orientation_summary(std::span<const OrientationResult> results);

}  // namespace valvekit
