#include "valvekit/stats/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

namespace valvekit {

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw Error(fmt::format("incomplete beta did not converge for a={} b={} x={}", a, b, x));
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw Error(fmt::format("{}: non-finite value {}", what, v));
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw Error("incomplete beta needs positive shape parameters");
    if (std::isnan(x)) throw Error("incomplete beta: x is NaN");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
    if (!(dof > 0)) throw Error("student t needs positive degrees of freedom");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
    return t > 0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const std::pair<double, double>> pairs) {
    const std::size_t n = pairs.size();
    if (n < 2) throw Error(fmt::format("paired t-test needs at least 2 pairs, got {}", n));
    std::vector<double> d;
    d.reserve(n);
    for (const auto& [a, b] : pairs) {
        require_finite(a, "paired t-test");
        require_finite(b, "paired t-test");
        d.push_back(a - b);
    }
    TTestResult r;
    r.dof = static_cast<int>(n) - 1;
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);
    r.mean_difference = mean;
    if (std::all_of(d.begin(), d.end(), [&](double v) { return v == d.front(); })) {
        if (d.front() == 0.0) {
            r.mean_difference = 0.0;
            r.degeneracy = Degeneracy::NoDifference;
            return r;
        }
        r.degeneracy = Degeneracy::ZeroVariance;
        r.t = d.front() > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
        r.p = 0.0;
        return r;
    }
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p = incomplete_beta(r.dof / 2.0, 0.5, r.dof / (r.dof + r.t * r.t));
    return r;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(fmt::format("paired t-test: {} vs {} values", a.size(), b.size()));
    }
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < a.size(); ++i) pairs.emplace_back(a[i], b[i]);
    return paired_t_test(pairs);
}

AnovaTable two_way_anova(const RaterMatrix& m) {
    const int n = m.targets, k = m.raters;
    if (n < 2 || k < 2) throw Error(fmt::format("ICC needs at least 2 targets and 2 raters, got {}x{}", n, k));
    if (m.values.size() != static_cast<std::size_t>(n) * k) throw Error("rater matrix size does not match its shape");
    for (double v : m.values) require_finite(v, "rater matrix");

    std::vector<double> row(n, 0.0), col(k, 0.0);
    double grand = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            row[i] += m(i, j);
            col[j] += m(i, j);
            grand += m(i, j);
        }
    }
    for (auto& v : row) v /= k;
    for (auto& v : col) v /= n;
    grand /= static_cast<double>(n) * k;

    double ss_rows = 0.0, ss_cols = 0.0, ss_total = 0.0, ss_error = 0.0;
    for (int i = 0; i < n; ++i) ss_rows += (row[i] - grand) * (row[i] - grand);
    ss_rows *= k;
    for (int j = 0; j < k; ++j) ss_cols += (col[j] - grand) * (col[j] - grand);
    ss_cols *= n;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            ss_total += (m(i, j) - grand) * (m(i, j) - grand);
            const double e = m(i, j) - row[i] - col[j] + grand;
            ss_error += e * e;
        }
    }
    if (!(ss_total > 0.0)) throw Error("degenerate matrix: zero total variance");
    if (ss_error < 1e-12 * ss_total) ss_error = 0.0;

    AnovaTable t;
    t.ms_rows = ss_rows / (n - 1);
    t.ms_cols = ss_cols / (k - 1);
    t.ms_error = ss_error / (static_cast<double>(n - 1) * (k - 1));
    return t;
}

double icc(const RaterMatrix& m, IccModel model) {
    const AnovaTable a = two_way_anova(m);
    const double k = m.raters, n = m.targets;
    double den = a.ms_rows + (k - 1.0) * a.ms_error;
    if (model == IccModel::Agreement21) den += k * (a.ms_cols - a.ms_error) / n;
    if (!(std::abs(den) > 0.0)) throw Error("degenerate matrix: ICC denominator is zero");
    return (a.ms_rows - a.ms_error) / den;
}

SummaryStats summarize(std::span<const double> values) {
    if (values.empty()) throw Error("cannot summarize an empty set");
    SummaryStats s;
    s.n = static_cast<int>(values.size());
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    for (double v : values) s.mean += v;
    s.mean /= s.n;
    if (s.n == 1) {
        s.sd_undefined = true;
        return s;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (s.n - 1));
    return s;
}

GroupBy parse_group_by(const std::string& spec) {
    GroupBy g;
    std::stringstream in(spec);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t") + 1);
        if (tok.empty()) continue;
        if (tok == "scan") g.scan = true;
        else if (tok == "label") g.label = true;
        else if (tok == "phase") g.phase = true;
        else if (tok == "frame") g.frame = true;
        else throw Error(fmt::format("unknown group-by key '{}' (expected scan, label, phase, frame)", tok));
    }
    return g;
}

std::vector<SummaryRow> aggregate(std::span<const MetricRecord> records, const GroupBy& group_by) {
    if (records.empty()) throw Error("aggregate: no records");
    using Key = std::tuple<std::string, int, int, int>;
    struct Bucket {
        std::vector<double> dice, mean, p95;
    };
    std::map<Key, Bucket> groups;
    for (const auto& r : records) {
        const Key key{group_by.scan ? r.scan_id : std::string{}, group_by.frame ? r.frame : -1,
                      group_by.label ? static_cast<int>(r.label) : 0,
                      group_by.phase ? static_cast<int>(r.phase) : -1};
        auto& b = groups[key];
        b.dice.push_back(r.dice);
        b.mean.push_back(r.mean_sym_dist);
        b.p95.push_back(r.p95_sym_dist);
    }
    std::vector<SummaryRow> rows;
    for (const auto& [key, b] : groups) {
        SummaryRow row;
        if (group_by.scan) row.scan_id = std::get<0>(key);
        if (group_by.frame) row.frame = std::get<1>(key);
        if (group_by.label) row.label = static_cast<Structure>(std::get<2>(key));
        if (group_by.phase) row.phase = static_cast<Phase>(std::get<3>(key));
        row.dice = summarize(b.dice);
        row.mean_sym_dist = summarize(b.mean);
        row.p95_sym_dist = summarize(b.p95);
        rows.push_back(std::move(row));
    }
    return rows;
}

OrientationSummary orientation_summary(std::span<const OrientationResult> results) {
    if (results.empty()) throw Error("orientation summary: no results");
    std::vector<double> angles;
    OrientationSummary s;
    for (const auto& r : results) {
        angles.push_back(r.offset_angle);
        s.any_flipped = s.any_flipped || r.flipped || r.offset_angle > 90.0;
    }
    s.angle = summarize(angles);
    return s;
}

}  // namespace valvekit
