#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "valvekit/core/manifest.hpp"
#include "valvekit/metrics/overlap.hpp"
#include "valvekit/phantom/phantom.hpp"
#include "valvekit/phantom/phantom_io.hpp"

using namespace valvekit;

TEST_CASE("phantom frames carry every structure and valid tags") {
    PhantomSpec s;
    s.open_fraction = {0.0, 0.3, 0.5, 0.8, 1.0};
    const auto ph = generate_phantom(s);
    REQUIRE(ph.series.size() == 5);
    ph.series.validate();
    CHECK(ph.series.phases == std::vector<Phase>{Phase::Diastole, Phase::Diastole, Phase::Diastole,
                                                 Phase::Systole, Phase::Systole});
    CHECK(ph.series.reference_diastole == 0);
    CHECK(ph.series.reference_systole == 3);
    for (const auto& f : ph.series.frames) {
        REQUIRE(f.labels.has_value());
        validate_labels(*f.labels);
        for (Structure st : kAllStructures) CHECK(count_label(*f.labels, to_id(st)) > 0);
    }
    REQUIRE(ph.truth.frames.size() == 5);
    CHECK(ph.truth.frames[0].motion.translation.norm() == 0.0);
    CHECK(ph.truth.frames[0].motion.twist == 0.0);
    CHECK(ph.truth.frames[3].motion.translation.norm() == 0.0);
    CHECK(ph.truth.frames[1].motion.translation.norm() > 0.0);
}

TEST_CASE("phantom truth reproduces the requested measurements") {
    for (double angle : {120.0, 160.0, 180.0}) {
        PhantomSpec s;
        s.commissural_angle = angle;
        s.fusion = angle == 120.0 ? Fusion::Tricuspid : Fusion::LR;
        s.open_fraction = {0.0, 1.0};
        const auto ph = generate_phantom(s);
        for (const auto& t : ph.truth.frames) {
            CHECK(t.annulus_diameter == doctest::Approx(s.annulus_diameter));
            CHECK(t.geometric_cusp_height == doctest::Approx(s.cusp_geometric_height));
            CHECK(t.commissural_angle == doctest::Approx(angle));
            CHECK(t.commissures.size() == 3);
        }
    }
}

TEST_CASE("phantom is deterministic and the jitter seed matters") {
    PhantomSpec s;
    s.open_fraction = {0.0};
    s.noise = 1.0;
    const auto a = generate_phantom(s);
    const auto b = generate_phantom(s);
    CHECK(*a.series.frames[0].labels == *b.series.frames[0].labels);
    s.noise_seed = 2;
    const auto c = generate_phantom(s);
    CHECK_FALSE(*a.series.frames[0].labels == *c.series.frames[0].labels);
}

TEST_CASE("analytic pull-back of the reference stays within the voxelization ceiling") {
    PhantomSpec s;
    s.open_fraction = {0.0, 0.0, 0.0};
    const auto ph = generate_phantom(s);
    const auto& ref = *ph.series.frames[0].labels;
    for (std::size_t t = 1; t < ph.series.size(); ++t) {
        const auto& truth = *ph.series.frames[t].labels;
        const auto u = ph.truth.pullback_field(t, ref.geometry());
        double peak = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (ref[i] != 0 || truth[i] != 0) peak = std::max(peak, u.at(i).norm());
        }
        CHECK(peak > 0.5);
        CHECK(peak <= s.motion_amplitude + 1e-6);
        const auto warped = apply_synthetic_deformation(ref, u);
        for (Structure st : kScoredStructures) {
            CAPTURE(structure_name(st));
            CHECK(dice(warped, truth, to_id(st)).value >= 0.9);
        }
    }
}

TEST_CASE("synthetic deformation by a whole-voxel translation shifts labels exactly") {
    PhantomSpec s;
    s.open_fraction = {0.0};
    const auto ph = generate_phantom(s);
    const auto& v = *ph.series.frames[0].labels;
    const auto& g = v.geometry();
    DisplacementField u(g);
    const Vec3 shift = g.direction * Vec3(0.0, 2.0 * g.spacing[1], 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) u.set(i, shift);
    const auto out = apply_synthetic_deformation(v, u);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const LabelId want = j + 2 < g.dims[1] ? v.at(i, j + 2, k) : LabelId{0};
                if (out.at(i, j, k) != want) {
                    FAIL("mismatch at ", i, " ", j, " ", k);
                }
            }
}

TEST_CASE("voxelization bound is half the spacing diagonal") {
    PhantomSpec s;
    s.spacing = Vec3(0.5, 0.5, 1.0);
    CHECK(voxelization_error_bound(s) == doctest::Approx(0.5 * std::sqrt(1.5)));
}

TEST_CASE("invalid phantom specs are rejected") {
    PhantomSpec s;
    s.fusion = Fusion::Tricuspid;
    CHECK_THROWS_AS(s.validate(), Error);
    s = {};
    s.spacing[2] = -1.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = {};
    s.open_fraction = {0.5, 1.2};
    CHECK_THROWS_AS(s.validate(), Error);
    s = {};
    s.cusp_geometric_height = 40.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = {};
    s.open_fraction = {0.9, 1.0};  // no closed reference is fine, only systole
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("phantom spec JSON and on-disk dataset") {
    const auto spec = phantom_spec_from_json(
        R"({"commissural_angle": 180, "fusion": "RN", "spacing": [0.5, 0.5, 0.75],
            "open_fraction": [0, 1], "scan_id": "demo"})");
    CHECK(spec.commissural_angle == 180.0);
    CHECK(spec.fusion == Fusion::RN);
    CHECK(spec.spacing[2] == 0.75);
    CHECK(spec.scan_id == "demo");
    CHECK_THROWS_WITH_AS(phantom_spec_from_json(R"({"comissural_angle": 150})"),
                         doctest::Contains("comissural_angle"), Error);

    const auto dir = test::scratch_dir("phantom_io");
    const auto ph = generate_phantom(spec);
    save_phantom(ph, dir);
    const auto m = load_manifest(dir / "manifest.json");
    const auto& scan = m.scan("demo");
    CHECK(scan.fusion == Fusion::RN);
    CHECK(scan.reference_systole == 1);
    const auto series = load_series(m, scan);
    const auto& a = *series.frames[1].labels;
    const auto& b = *ph.series.frames[1].labels;
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end()));
    CHECK(same_geometry(a.geometry(), b.geometry(), 1e-5));
    CHECK(std::filesystem::exists(dir / "truth.json"));
}
