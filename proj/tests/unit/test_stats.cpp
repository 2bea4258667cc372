#include <cmath>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "doctest.h"
#include "valvekit/stats/report.hpp"
#include "valvekit/stats/statistics.hpp"
#include "valvekit/stats/temporal.hpp"

using namespace valvekit;

namespace {

struct Oracle {
    double msr, msc, mse;
};

Oracle anova_oracle(const RaterMatrix& m) {
    const int n = m.targets, k = m.raters;
    double grand = 0;
    for (double v : m.values) grand += v;
    grand /= n * k;
    double ssr = 0, ssc = 0, sst = 0;
    for (int i = 0; i < n; ++i) {
        double row = 0;
        for (int j = 0; j < k; ++j) row += m(i, j);
        ssr += k * std::pow(row / k - grand, 2);
    }
    for (int j = 0; j < k; ++j) {
        double col = 0;
        for (int i = 0; i < n; ++i) col += m(i, j);
        ssc += n * std::pow(col / n - grand, 2);
    }
    for (double v : m.values) sst += (v - grand) * (v - grand);
    return {ssr / (n - 1), ssc / (k - 1), (sst - ssr - ssc) / ((n - 1) * (k - 1))};
}

RaterMatrix random_matrix(std::mt19937_64& rng, int n, int k) {
    std::normal_distribution<double> target(20, 5), noise(0, 1.5), bias(0, 1);
    RaterMatrix m{n, k, {}};
    std::vector<double> b(k);
    for (auto& x : b) x = bias(rng);
    for (int i = 0; i < n; ++i) {
        const double t = target(rng);
        for (int j = 0; j < k; ++j) m.values.push_back(t + b[j] + noise(rng));
    }
    return m;
}

TemporalCurve curve(std::vector<double> dice, std::vector<Phase> phases) {
    TemporalCurve c;
    c.scan_id = "s";
    for (std::size_t i = 0; i < dice.size(); ++i) c.frames.push_back(static_cast<int>(i));
    c.dice = std::move(dice);
    c.phases = std::move(phases);
    return c;
}

MetricRecord metric(std::string scan, int frame, Structure label, Phase phase, double dice) {
    MetricRecord r;
    r.scan_id = std::move(scan);
    r.frame = frame;
    r.label = label;
    r.phase = phase;
    r.dice = dice;
    r.mean_sym_dist = 1.0 - dice;
    r.p95_sym_dist = 2.0 * (1.0 - dice);
    return r;
}

}  // namespace

TEST_CASE("incomplete beta and t distribution agree with Boost") {
    for (double a : {0.5, 1.0, 2.5, 7.0})
        for (double b : {0.5, 3.0, 10.0})
            for (double x : {0.0, 0.01, 0.3, 0.5, 0.9, 1.0}) {
                CHECK(incomplete_beta(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-12));
            }
    for (double dof : {1.0, 2.0, 5.0, 30.0, 200.0}) {
        boost::math::students_t dist(dof);
        for (double t : {-8.0, -2.5, -0.3, 0.0, 1.0, 4.2}) {
            CHECK(student_t_cdf(t, dof) == doctest::Approx(boost::math::cdf(dist, t)).epsilon(1e-12));
        }
    }
}

TEST_CASE("paired t-test matches the Boost reference distribution") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0, 1);
    for (int n : {2, 3, 8, 25}) {
        std::vector<double> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = 10 + nd(rng);
            b[i] = a[i] + 0.4 + 0.8 * nd(rng);
        }
        const auto r = paired_t_test(a, b);
        double mean = 0, ss = 0;
        for (int i = 0; i < n; ++i) mean += (a[i] - b[i]) / n;
        for (int i = 0; i < n; ++i) ss += std::pow(a[i] - b[i] - mean, 2);
        const double t = mean / std::sqrt(ss / (n - 1) / n);
        boost::math::students_t dist(n - 1);
        CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
        CHECK(r.p == doctest::Approx(2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)))).epsilon(1e-10));
        CHECK(r.dof == n - 1);
        CHECK(r.degeneracy == Degeneracy::None);
    }
}

TEST_CASE("paired t-test degenerate inputs") {
    const std::vector<double> a{1, 2, 3}, same{1, 2, 3}, shifted{0, 1, 2};
    auto r = paired_t_test(a, same);
    CHECK(r.degeneracy == Degeneracy::NoDifference);
    CHECK(r.t == 0.0);
    CHECK(r.p == 1.0);
    r = paired_t_test(a, shifted);
    CHECK(r.degeneracy == Degeneracy::ZeroVariance);
    CHECK(std::isinf(r.t));
    CHECK(r.p == 0.0);
    CHECK_THROWS_AS(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), Error);
    CHECK_THROWS_AS(paired_t_test(a, std::vector<double>{1, 2}), Error);
}

TEST_CASE("ICC matches the ANOVA mean-squares formulas") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_matrix(rng, 6, 4);
        const auto o = anova_oracle(m);
        const auto t = two_way_anova(m);
        CHECK(t.ms_rows == doctest::Approx(o.msr).epsilon(1e-12));
        CHECK(t.ms_cols == doctest::Approx(o.msc).epsilon(1e-12));
        CHECK(t.ms_error == doctest::Approx(o.mse).epsilon(1e-10));
        const int k = m.raters, n = m.targets;
        CHECK(icc(m, IccModel::Consistency31) ==
              doctest::Approx((o.msr - o.mse) / (o.msr + (k - 1) * o.mse)).epsilon(1e-12));
        CHECK(icc(m, IccModel::Agreement21) ==
              doctest::Approx((o.msr - o.mse) / (o.msr + (k - 1) * o.mse + k * (o.msc - o.mse) / n)).epsilon(1e-12));
    }
}

TEST_CASE("ICC edge cases") {
    RaterMatrix offset{3, 2, {1, 11, 2, 12, 4, 14}};
    CHECK(icc_consistency(offset) == 1.0);
    CHECK(icc(offset, IccModel::Agreement21) < 1.0);
    RaterMatrix constant{3, 2, {5, 5, 5, 5, 5, 5}};
    CHECK_THROWS_WITH_AS(icc(constant), doctest::Contains("degenerate"), Error);
    RaterMatrix tiny{1, 3, {1, 2, 3}};
    CHECK_THROWS_AS(icc(tiny), Error);
}

TEST_CASE("summaries and grouping") {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    const auto s = summarize(v);
    CHECK(s.mean == 5.0);
    CHECK(s.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(s.min == 2.0);
    CHECK(s.max == 9.0);
    CHECK(s.n == 8);
    const auto one = summarize(std::vector<double>{3.0});
    CHECK(one.sd == 0.0);
    CHECK(one.sd_undefined);
    CHECK_THROWS_AS(summarize(std::vector<double>{}), Error);

    const auto g = parse_group_by("scan, label");
    CHECK(g.scan);
    CHECK(g.label);
    CHECK_FALSE(g.phase);
    CHECK_THROWS_WITH_AS(parse_group_by("scan,colour"), doctest::Contains("colour"), Error);

    std::vector<MetricRecord> recs{
        metric("a", 0, Structure::LCusp, Phase::Diastole, 0.8), metric("a", 1, Structure::LCusp, Phase::Systole, 0.6),
        metric("a", 0, Structure::RootWall, Phase::Diastole, 0.9), metric("b", 0, Structure::LCusp, Phase::Diastole, 0.7)};
    const auto by_label = aggregate(recs, parse_group_by("label"));
    REQUIRE(by_label.size() == 2);
    CHECK(by_label[0].label == Structure::LCusp);
    CHECK(by_label[0].dice.n == 3);
    CHECK(by_label[0].dice.mean == doctest::Approx(0.7));
    CHECK_FALSE(by_label[0].scan_id.has_value());
    CHECK(by_label[1].dice.sd_undefined);

    const auto by_scan_phase = aggregate(recs, parse_group_by("scan,phase"));
    REQUIRE(by_scan_phase.size() == 3);
    CHECK(by_scan_phase[0].scan_id == "a");
    CHECK(by_scan_phase[0].phase == Phase::Diastole);
    CHECK(by_scan_phase[0].dice.mean == doctest::Approx(0.85));
    CHECK(by_scan_phase[0].p95_sym_dist.mean == doctest::Approx(0.3));

    const auto all = aggregate(recs, GroupBy{});
    REQUIRE(all.size() == 1);
    CHECK(all[0].dice.n == 4);
}

TEST_CASE("orientation summary") {
    const std::vector<OrientationResult> r{{5.0, false}, {15.0, false}, {175.0, true}};
    const auto s = orientation_summary(r);
    CHECK(s.angle.mean == doctest::Approx(65.0));
    CHECK(s.any_flipped);
    CHECK_THROWS_AS(orientation_summary(std::vector<OrientationResult>{}), Error);
}

TEST_CASE("dip detection compares each frame with the rest of its phase") {
    const auto D = Phase::Diastole, S = Phase::Systole;
    auto r = detect_dips(curve({0.7, 0.7, 0.2, 0.7, 0.7}, {D, D, D, D, D}));
    CHECK(r.dips == std::vector<int>{2});
    CHECK(r.unevaluable.empty());

    r = detect_dips(curve({0.80, 0.82, 0.79, 0.81, 0.80, 0.83}, {D, D, D, D, D, D}));
    CHECK(r.dips.empty());

    // A drop is judged only against the same phase.
    r = detect_dips(curve({0.90, 0.92, 0.89, 0.5, 0.52, 0.49}, {D, D, D, S, S, S}));
    CHECK(r.dips.empty());
    CHECK(r.unevaluable.empty());

    r = detect_dips(curve({0.8, 0.8, 0.7, 0.6}, {D, D, D, S}));
    CHECK(r.unevaluable == std::vector<int>{3});

    r = detect_dips(curve({0.8, 0.8, 0.8, 0.8}, {D, D, D, D}));
    CHECK(r.dips.empty());
    CHECK_THROWS_AS(detect_dips(curve({0.8, 0.7}, {D, D}), 0.0), Error);
}

TEST_CASE("curves from records are sorted per scan and label") {
    std::vector<MetricRecord> recs{metric("a", 2, Structure::NCusp, Phase::Systole, 0.5),
                                   metric("a", 0, Structure::NCusp, Phase::Diastole, 0.9),
                                   metric("a", 1, Structure::NCusp, Phase::Diastole, 0.8),
                                   metric("b", 0, Structure::LCusp, Phase::Diastole, 0.7)};
    const auto c = curves_from_records(recs);
    REQUIRE(c.size() == 2);
    CHECK(c[0].scan_id == "a");
    CHECK(c[0].frames == std::vector<int>{0, 1, 2});
    CHECK(c[0].dice == std::vector<double>{0.9, 0.8, 0.5});
    CHECK(c[0].phases[2] == Phase::Systole);
    recs.push_back(metric("a", 1, Structure::NCusp, Phase::Diastole, 0.7));
    CHECK_THROWS_WITH_AS(curves_from_records(recs), doctest::Contains("duplicate"), Error);
    const auto csv = render_plot_data(c);
    CHECK(csv.rfind("scan_id,label,frame,phase,dice\n", 0) == 0);
    CHECK(csv.find("a,NCusp,2,Systole,0.500000") != std::string::npos);
}

TEST_CASE("cell formatting follows the table convention") {
    CHECK(format_p_value(0.1) == "p=0.1");
    CHECK(format_p_value(0.234) == "p=0.23");
    CHECK(format_p_value(0.9) == "p=0.9");
    CHECK(format_p_value(0.004) == "p<0.01");
    CHECK(format_p_value(1.0) == "p=1");
    DifferenceCell d;
    d.abs_difference.mean = 2.0749;
    d.abs_difference.sd = 1.63;
    d.test.p = 0.1;
    CHECK(format_difference_cell(d) == "2.07 ± 1.63 (p=0.1)");
    RaterCell rc;
    rc.max_difference.mean = 17.594;
    rc.max_difference.sd = 8.45;
    rc.icc = 0.75;
    CHECK(format_rater_cell(rc) == "17.59 ± 8.45 (ICC=0.75)");
    CHECK(table_format_from_name("md") == TableFormat::Markdown);
    CHECK(table_format_from_name("json") == TableFormat::Json);
    CHECK_THROWS_AS(table_format_from_name("xlsx"), Error);
}

TEST_CASE("measurement comparison pairs records and flags problems") {
    auto rec = [](std::string scan, int frame, MeasurementSource src, std::optional<std::string> rater, double h) {
        MeasurementRecord r;
        r.scan_id = std::move(scan);
        r.frame = frame;
        r.source = src;
        r.rater = std::move(rater);
        r.geometric_cusp_height = h;
        r.annulus_diameter = 2 * h;
        r.commissural_angle = 10 * h;
        return r;
    };
    const auto GT = MeasurementSource::GroundTruth, PR = MeasurementSource::Predicted;
    std::vector<MeasurementRecord> recs{rec("a", 0, GT, {}, 14), rec("a", 0, PR, {}, 13),
                                        rec("a", 1, GT, {}, 15), rec("a", 1, PR, {}, 15.5),
                                        rec("b", 0, GT, {}, 12), rec("b", 0, PR, {}, 12.5)};
    auto report = measurement_comparison(recs);
    REQUIRE(report.table1.size() == 1);
    CHECK(report.table1[0].name == "Automated");
    const auto& h = report.table1[0].cells[0];
    CHECK(h.abs_difference.mean == doctest::Approx(2.0 / 3.0));
    CHECK(h.test.mean_difference == doctest::Approx(0.0));
    CHECK(report.table1[0].cells[2].abs_difference.mean == doctest::Approx(4.0 / 3.0));
    CHECK(report.table2.empty());
    CHECK_THROWS_AS(render_table2(report, TableFormat::Markdown), Error);

    const auto per_scan = measurement_comparison(recs, IccModel::Consistency31, Pairing::PerScan);
    CHECK(per_scan.table1[0].cells[0].abs_difference.n == 2);
    CHECK(per_scan.table1[0].cells[0].abs_difference.mean == doctest::Approx((0.25 + 0.5) / 2));

    recs.push_back(rec("c", 0, GT, {}, 12));
    CHECK_THROWS_WITH_AS(measurement_comparison(recs), doctest::Contains("no Predicted counterpart"), Error);
    recs.back() = rec("a", 0, PR, {}, 12);
    CHECK_THROWS_WITH_AS(measurement_comparison(recs), doctest::Contains("duplicate"), Error);
}
