// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Usage: valvekit_acceptance <fixture-data-dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "valvekit/metrics/evaluate.hpp"
#include "valvekit/metrics/mesh_distance.hpp"
#include "valvekit/metrics/overlap.hpp"
#include "valvekit/metrics/surface.hpp"
#include "valvekit/morphometry/landmarks.hpp"
#include "valvekit/phantom/phantom.hpp"
#include "valvekit/propagation/registration.hpp"
#include "valvekit/stats/records_io.hpp"
#include "valvekit/stats/report.hpp"
#include "valvekit/stats/statistics.hpp"
#include "valvekit/stats/temporal.hpp"

using namespace valvekit;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Point-to-triangle distance by plane projection when the foot lies inside,
// otherwise the nearest of the three edge segments.
double point_triangle_oracle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 n = (b - a).cross(c - a);
    const double nn = n.squaredNorm();
    const Vec3 q = p - n * (p - a).dot(n) / nn;
    const double wa = (c - b).cross(q - b).dot(n) / nn;
    const double wb = (a - c).cross(q - c).dot(n) / nn;
    if (wa >= 0 && wb >= 0 && 1.0 - wa - wb >= 0) return (p - q).norm();
    auto seg = [&](const Vec3& s, const Vec3& e) {
        const double t = std::clamp((p - s).dot(e - s) / (e - s).squaredNorm(), 0.0, 1.0);
        return (p - (s + t * (e - s))).norm();
    };
    return std::min({seg(a, b), seg(b, c), seg(c, a)});
}

DistanceSummary mesh_distance_oracle(const SurfaceMesh& a, const SurfaceMesh& b) {
    std::vector<double> d;
    auto directed = [&](const SurfaceMesh& from, const SurfaceMesh& to) {
        for (const auto& p : from.vertices) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& t : to.triangles) {
                best = std::min(best, point_triangle_oracle(p, to.vertices[t[0]], to.vertices[t[1]], to.vertices[t[2]]));
            }
            d.push_back(best);
        }
    };
    directed(a, b);
    directed(b, a);
    DistanceSummary s;
    s.count = d.size();
    for (double x : d) s.mean += x / static_cast<double>(d.size());
    std::sort(d.begin(), d.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(d.size())));
    s.p95 = d[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

SurfaceMesh random_mesh(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nv(3, 200);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    SurfaceMesh m;
    const int n = nv(rng);
    for (int i = 0; i < n; ++i) m.vertices.emplace_back(coord(rng), coord(rng), coord(rng));
    std::uniform_int_distribution<int> pick(0, n - 1);
    const int n_tri = std::max(1, n / 2);
    while (static_cast<int>(m.triangles.size()) < n_tri) {
        const std::array<int, 3> t{pick(rng), pick(rng), pick(rng)};
        const Vec3 e = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
        if (e.norm() > 1e-3) m.triangles.push_back(t);
    }
    return m;
}

Outcome criterion_metric_oracles() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    ImageGeometry g;
    g.dims = {8, 8, 8};
    double worst_dice = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_real_distribution<double> density(0.0, 1.0);
        std::bernoulli_distribution pa(density(rng)), pb(density(rng));
        BinaryMask a(g), b(g);
        double inter = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = pa(rng);
            b[i] = pb(rng);
            inter += a[i] && b[i];
            na += a[i];
            nb += b[i];
        }
        const double want = na + nb == 0 ? 1.0 : 2.0 * inter / (na + nb);
        worst_dice = std::max(worst_dice, std::abs(dice(a, b).value - want));
    }
    double worst_mesh = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_mesh(rng);
        const auto b = random_mesh(rng);
        const auto got = symmetric_mesh_distance(a, b);
        const auto want = mesh_distance_oracle(a, b);
        worst_mesh = std::max({worst_mesh, std::abs(got.mean - want.mean), std::abs(got.p95 - want.p95)});
    }
    const double secs = seconds_since(t0);
    return {worst_dice <= 1e-12 && worst_mesh <= 1e-9 && secs < 10.0,
            fmt::format("max dice error {:.1e}, max mesh error {:.1e}, {:.2f} s", worst_dice, worst_mesh, secs)};
}

SurfaceMesh unit_square(double z) {
    SurfaceMesh m;
    m.vertices = {Vec3(0, 0, z), Vec3(1, 0, z), Vec3(1, 1, z), Vec3(0, 1, z)};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

Outcome criterion_analytic_distance() {
    const auto s = symmetric_mesh_distance(unit_square(0.0), unit_square(2.0));
    return {std::abs(s.mean - 2.0) <= 1e-9 && std::abs(s.p95 - 2.0) <= 1e-9,
            fmt::format("mean {:.12f}, p95 {:.12f}", s.mean, s.p95)};
}

Outcome criterion_morphometry() {
    double worst_len = 0.0, worst_angle = 0.0, slowest = 0.0;
    int frames = 0;
    for (double angle : {120.0, 160.0, 180.0}) {
        const auto t0 = Clock::now();
        PhantomSpec s;
        s.annulus_diameter = 24.0;
        s.cusp_geometric_height = 14.0;
        s.commissural_angle = angle;
        s.fusion = angle == 120.0 ? Fusion::Tricuspid : Fusion::LR;
        s.spacing = Vec3::Constant(0.5);
        s.open_fraction = {0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0};
        const auto ph = generate_phantom(s);
        for (std::size_t t = 0; t < ph.series.size(); ++t) {
            const auto r = measure_frame(*ph.series.frames[t].labels, s.fusion);
            const auto& truth = ph.truth.frames[t];
            worst_len = std::max({worst_len, std::abs(r.geometric_cusp_height - truth.geometric_cusp_height),
                                  std::abs(r.annulus_diameter - truth.annulus_diameter)});
            worst_angle = std::max(worst_angle, std::abs(r.commissural_angle - truth.commissural_angle));
            ++frames;
        }
        slowest = std::max(slowest, seconds_since(t0));
    }
    return {worst_len <= 1.0 && worst_angle <= 5.0 && slowest < 60.0,
            fmt::format("{} frames, max length error {:.3f} mm, max angle error {:.2f} deg, slowest phantom {:.1f} s",
                        frames, worst_len, worst_angle, slowest)};
}

Outcome criterion_orientation() {
    PhantomSpec s;
    s.open_fraction = {0.0};
    const auto base = generate_phantom(s);
    const auto& b = *base.series.frames[0].labels;
    const auto self = outflow_orientation(b, b);

    PhantomSpec flipped = s;
    flipped.outflow_axis = -Vec3::UnitZ();
    const auto f = outflow_orientation(*generate_phantom(flipped).series.frames[0].labels, b);

    PhantomSpec rotated = s;
    const double a = 10.0 * M_PI / 180.0;
    rotated.outflow_axis = Vec3(std::sin(a), 0.0, std::cos(a));
    const auto r = outflow_orientation(*generate_phantom(rotated).series.frames[0].labels, b);

    const bool pass = self.offset_angle <= 1e-9 && !self.flipped && f.flipped && f.offset_angle > 170.0 &&
                      std::abs(r.offset_angle - 10.0) <= 2.0 && !r.flipped;
    return {pass, fmt::format("self {:.3f} deg, flipped {:.2f} deg ({}), rotated {:.2f} deg", self.offset_angle,
                              f.offset_angle, f.flipped ? "flipped" : "not flipped", r.offset_angle)};
}

Outcome criterion_propagation() {
    const auto t0 = Clock::now();
    PhantomSpec s;
    s.open_fraction = {0.0, 0.0, 0.0, 0.0};
    s.motion_amplitude = 3.0;
    s.grid_dims = Index3{128, 128, 128};
    const auto ph = generate_phantom(s);

    // Phantom frames carry no grayscale, so each target is registered through
    // its own label map; the regenerated frames are the truth.
    const RegistrationConfig cfg;
    const auto result = propagate_phase(ph.series, Phase::Diastole, cfg);
    double cusp_min = 1.0, wall_min = 1.0;
    for (std::size_t t = 1; t < ph.series.size(); ++t) {
        const auto& pred = *result.series.frames[t].labels;
        const auto& truth = *ph.series.frames[t].labels;
        for (Structure c : kCusps) cusp_min = std::min(cusp_min, dice(pred, truth, to_id(c)).value);
        wall_min = std::min(wall_min, dice(pred, truth, to_id(Structure::RootWall)).value);
    }
    const auto& ref = *ph.series.frames[0].labels;
    const double identity = register_deformable(ref, ref, cfg).max_norm() / ref.geometry().spacing.minCoeff();
    const double secs = seconds_since(t0);
    return {cusp_min >= 0.85 && wall_min >= 0.90 && identity <= 0.1 && secs < 300.0,
            fmt::format("min cusp Dice {:.3f}, min wall Dice {:.3f}, identity |u|max {:.3f} voxel, {:.1f} s",
                        cusp_min, wall_min, identity, secs)};
}

// Mean squares of a two-way layout without interaction, computed directly.
double icc_oracle(const RaterMatrix& m) {
    const int n = m.targets, k = m.raters;
    double grand = 0;
    for (double v : m.values) grand += v / (n * k);
    double ssr = 0, ssc = 0, sst = 0;
    for (int i = 0; i < n; ++i) {
        double mean = 0;
        for (int j = 0; j < k; ++j) mean += m(i, j) / k;
        ssr += k * (mean - grand) * (mean - grand);
    }
    for (int j = 0; j < k; ++j) {
        double mean = 0;
        for (int i = 0; i < n; ++i) mean += m(i, j) / n;
        ssc += n * (mean - grand) * (mean - grand);
    }
    for (double v : m.values) sst += (v - grand) * (v - grand);
    const double msr = ssr / (n - 1);
    const double mse = (sst - ssr - ssc) / ((n - 1) * (k - 1));
    return (msr - mse) / (msr + (k - 1) * mse);
}

Outcome criterion_statistics() {
    const std::vector<double> d{1, 2, 3}, zero{0, 0, 0};
    const auto t = paired_t_test(d, zero);
    const bool t_ok = std::abs(t.t - 3.4641) <= 1e-4 && std::abs(t.p - 0.0742) <= 1e-4;

    std::mt19937_64 rng(606);
    std::normal_distribution<double> target(50, 10), noise(0, 3);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        RaterMatrix m{5, 3, {}};
        for (int i = 0; i < 5; ++i) {
            const double x = target(rng);
            for (int j = 0; j < 3; ++j) m.values.push_back(x + noise(rng));
        }
        worst = std::max(worst, std::abs(icc_consistency(m) - icc_oracle(m)));
    }
    const RaterMatrix offset{5, 3, {1, 4, 11, 2, 5, 12, 7, 10, 17, 3, 6, 13, -2, 1, 8}};
    const double icc_offset = icc_consistency(offset);
    return {t_ok && worst <= 1e-9 && icc_offset == 1.0,
            fmt::format("t {:.4f}, p {:.4f}, max ICC error {:.1e}, offset-column ICC {}", t.t, t.p, worst,
                        icc_offset)};
}

Outcome criterion_majority_vote() {
    std::mt19937_64 rng(707);
    ImageGeometry g;
    g.dims = {16, 16, 16};
    std::size_t mismatches = 0, ties = 0;
    for (int trial = 0; trial < 20; ++trial) {
        // Few labels per trial make ties common.
        std::uniform_int_distribution<int> pick(0, trial % 2 == 0 ? 2 : kMaxLabelId);
        std::vector<LabelVolume> v;
        for (int r = 0; r < 5; ++r) {
            LabelVolume x(g);
            for (auto& e : x.data()) e = static_cast<LabelId>(pick(rng));
            v.push_back(std::move(x));
        }
        const auto out = majority_vote(v);
        for (std::size_t i = 0; i < out.size(); ++i) {
            std::array<int, kMaxLabelId + 1> count{};
            for (const auto& x : v) ++count[x[i]];
            int best = 0;
            for (int id = 1; id <= kMaxLabelId; ++id) {
                if (count[id] > count[best]) best = id;
            }
            ties += std::count(count.begin(), count.end(), count[best]) > 1;
            mismatches += out[i] != best;
        }
    }
    return {mismatches == 0, fmt::format("{} mismatching voxels, {} tied voxels checked", mismatches, ties)};
}

Outcome criterion_report_fidelity(const fs::path& data) {
    const auto records = load_measurement_records(data / "measurements.csv");
    const auto report = measurement_comparison(records);
    std::vector<std::string> diffs;
    const std::vector<std::pair<std::string, std::string>> outputs{
        {"table1.md", render_table1(report, TableFormat::Markdown)},
        {"table2.md", render_table2(report, TableFormat::Markdown)},
        {"table1.csv", render_table1(report, TableFormat::Csv)},
        {"table2.csv", render_table2(report, TableFormat::Csv)}};
    for (const auto& [name, text] : outputs) {
        if (read_text_file(data / name) != text) diffs.push_back(name);
    }
    const std::regex cell(R"(^\d+\.\d\d ± \d+\.\d\d \((p=\d(\.\d{1,2})?|p<0\.01)\)$)");
    int bad_cells = 0;
    for (const auto& row : report.table1) {
        for (const auto& c : row.cells) bad_cells += !std::regex_match(format_difference_cell(c), cell);
    }
    std::string detail = diffs.empty() ? "4 golden files identical" : "differs: " + fmt::format("{}", fmt::join(diffs, ", "));
    detail += fmt::format(", {} malformed cells", bad_cells);
    return {diffs.empty() && bad_cells == 0, detail};
}

Outcome criterion_jitter_smoke() {
    PhantomSpec s;
    s.open_fraction = {0.0};
    const auto clean = generate_phantom(s);
    s.noise = 1.0;
    const auto noisy = generate_phantom(s);
    const auto& a = *clean.series.frames[0].labels;
    const auto& b = *noisy.series.frames[0].labels;
    const double diag = a.geometry().voxel_diagonal();
    double dmin = 1.0, dmax = 0.0, dist_max = 0.0;
    for (Structure st : kScoredStructures) {
        const double d = dice(b, a, to_id(st)).value;
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
        dist_max = std::max(dist_max, symmetric_mesh_distance(extract_surface(b, to_id(st)),
                                                              extract_surface(a, to_id(st))).mean);
    }
    return {dmin > 0.5 && dmax < 0.95 && dist_max < diag,
            fmt::format("Dice {:.3f}-{:.3f}, max mean distance {:.3f} mm (voxel diagonal {:.3f} mm)", dmin, dmax,
                        dist_max, diag)};
}

Outcome criterion_temporal() {
    std::mt19937_64 rng(1010);
    std::normal_distribution<double> jitter(0.0, 0.002);
    TemporalCurve c;
    c.scan_id = "synthetic";
    const int n = 20, drop = 7;
    for (int t = 0; t < n; ++t) {
        const bool systole = t >= 8 && t < 14;
        // Smooth frame-to-frame variation within each phase, as in per-frame
        // Dice curves of a cardiac cycle.
        double v = (systole ? 0.72 : 0.80) + 0.01 * std::cos(2.0 * M_PI * t / n) + jitter(rng);
        if (t == drop) v -= 0.15;  // transitional frame just before opening
        c.frames.push_back(t);
        c.dice.push_back(v);
        c.phases.push_back(systole ? Phase::Systole : Phase::Diastole);
    }
    const auto r = detect_dips(c, 2.0);
    return {r.dips == std::vector<int>{drop} && r.unevaluable.empty(),
            fmt::format("flagged frames [{}], injected {}", fmt::join(r.dips, ", "), drop)};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path data = argc > 1 ? fs::path(argv[1]) : fs::path("tests/data");
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"metric oracle equivalence", criterion_metric_oracles},
        {"analytic mesh distance", criterion_analytic_distance},
        {"phantom morphometry round-trip", criterion_morphometry},
        {"outflow orientation", criterion_orientation},
        {"label propagation", criterion_propagation},
        {"statistics oracles", criterion_statistics},
        {"majority vote", criterion_majority_vote},
        {"report fidelity", [&] { return criterion_report_fidelity(data); }},
        {"boundary jitter smoke test", criterion_jitter_smoke},
        {"temporal dip detection", criterion_temporal},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        failed += !o.pass;
        fmt::print("[{}] {:2d} {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail);
        std::fflush(stdout);
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
