#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"
#include "helpers.hpp"
#include "valvekit/core/displacement_field.hpp"
#include "valvekit/core/manifest.hpp"
#include "valvekit/core/volume_io.hpp"

using namespace valvekit;
namespace fs = std::filesystem;

TEST_CASE("label schema ids and names are stable") {
    CHECK(to_id(Structure::LCusp) == 1);
    CHECK(to_id(Structure::STJ) == 6);
    for (Structure s : kAllStructures) {
        CHECK(structure_from_name(structure_name(s)) == s);
        CHECK(structure_from_id(to_id(s)) == s);
    }
    CHECK_FALSE(structure_from_id(7).has_value());
    CHECK(non_fused_cusp(Fusion::LR) == Structure::NCusp);
    CHECK(non_fused_cusp(Fusion::RN) == Structure::LCusp);
    CHECK(non_fused_cusp(Fusion::LN) == Structure::RCusp);
    CHECK(fusion_from_name("Tricuspid") == Fusion::Tricuspid);
    CHECK_FALSE(fusion_from_name("XY").has_value());
    CHECK(phase_from_name("systole") == Phase::Systole);
    CHECK(phase_from_name("D") == Phase::Diastole);
}

TEST_CASE("geometry maps indices to physical space and back") {
    ImageGeometry g;
    g.dims = {4, 5, 6};
    g.spacing = Vec3(0.5, 1.0, 2.0);
    g.origin = Vec3(10, -3, 7);
    g.direction = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    const Vec3 idx(1.5, 2.0, 4.25);
    CHECK((g.to_index(g.to_physical(idx)) - idx).norm() < 1e-12);
    CHECK(g.linear(3, 4, 5) == g.voxel_count() - 1);
    const auto u = g.unravel(g.linear(2, 3, 1));
    CHECK(u == Index3{2, 3, 1});

    ImageGeometry bad = g;
    bad.spacing[1] = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = g;
    bad.direction(0, 0) += 0.5;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("projected angle ignores the normal component") {
    const Vec3 n = Vec3::UnitZ();
    CHECK(projected_angle_deg(Vec3(1, 0, 5), Vec3(0, 1, -3), Vec3::Zero(), n) == doctest::Approx(90.0));
    CHECK(projected_angle_deg(Vec3(1, 0, 0), Vec3(-1, 0, 2), Vec3::Zero(), n) == doctest::Approx(180.0));
}

TEST_CASE("label validation and centroids") {
    LabelVolume v(test::cube_geometry(4));
    v.at(1, 2, 3) = 2;
    v.at(3, 2, 1) = 2;
    CHECK(count_label(v, 2) == 2);
    CHECK((centroid_mm(v, 2) - Vec3(2, 2, 2)).norm() < 1e-12);
    CHECK_THROWS_WITH_AS(centroid_mm(v, 5), doctest::Contains("empty label LVO"), Error);
    v.at(0, 0, 0) = 9;
    CHECK_THROWS_WITH_AS(validate_labels(v), doctest::Contains("unknown label id 9"), Error);
}

TEST_CASE("volume files round-trip geometry and values") {
    const auto dir = test::scratch_dir("core_io");
    std::mt19937_64 rng(3);
    ImageGeometry g;
    g.dims = {5, 4, 3};
    g.spacing = Vec3(0.5, 0.75, 1.25);
    g.origin = Vec3(-2.5, 1.0, 30.0);
    g.direction = Eigen::AngleAxisd(0.4, Vec3::UnitZ()).toRotationMatrix();
    const auto labels = test::random_labels(g, rng);
    ScalarVolume img(g);
    std::normal_distribution<float> nd(100.0f, 30.0f);
    for (auto& x : img.data()) x = nd(rng);

    for (const char* ext : {".nii", ".nii.gz", ".mha"}) {
        CAPTURE(ext);
        const auto lp = dir / (std::string("labels") + ext);
        save_volume(labels, lp);
        const auto back = load_volume(lp);
        CHECK(back.data().size() == labels.data().size());
        CHECK(std::equal(back.data().begin(), back.data().end(), labels.data().begin()));
        CHECK(same_geometry(back.geometry(), labels.geometry(), 1e-5));

        const auto ip = dir / (std::string("image") + ext);
        save_image(img, ip);
        const auto iback = load_image(ip);
        CHECK(std::equal(iback.data().begin(), iback.data().end(), img.data().begin()));
        CHECK(same_geometry(iback.geometry(), img.geometry(), 1e-5));
    }
    CHECK_THROWS_AS(load_volume(dir / "missing.nii.gz"), IoError);
    CHECK_THROWS_AS(format_from_path(dir / "x.png"), Error);
}

TEST_CASE("corrupt volume files are rejected") {
    const auto dir = test::scratch_dir("core_corrupt");
    {
        std::ofstream f(dir / "short.nii", std::ios::binary);
        f << "not a nifti header";
    }
    CHECK_THROWS_AS(load_volume(dir / "short.nii"), IoError);

    ScalarVolume bad(test::cube_geometry(3), 7.0f);
    save_image(bad, dir / "seven.nii");
    CHECK_THROWS_AS(load_volume(dir / "seven.nii"), Error);
}

TEST_CASE("displacement field sampling and pull-back") {
    const auto g = test::cube_geometry(6);
    DisplacementField u(g);
    for (std::size_t i = 0; i < u.size(); ++i) u.set(i, Vec3(1.0, 0.0, 0.0));
    CHECK(u.max_norm() == doctest::Approx(1.0));
    CHECK(u.all_finite());
    CHECK((u.sample(Vec3(2.5, 3.5, 1.25)) - Vec3(1, 0, 0)).norm() < 1e-6);

    LabelVolume seg(g);
    seg.at(3, 2, 2) = 1;
    const auto out = pull_back_labels(seg, u);
    CHECK(out.at(2, 2, 2) == 1);
    CHECK(count_label(out, 1) == 1);
    CHECK(out.at(5, 0, 0) == 0);  // samples past the grid edge are background

    u.component(1)[0] = std::nanf("");
    CHECK_FALSE(u.all_finite());
}

namespace {

Manifest write_tiny_dataset(const fs::path& dir) {
    const auto g = test::cube_geometry(4);
    LabelVolume v(g);
    v.at(1, 1, 1) = 1;
    save_volume(v, dir / "f0.nii.gz");
    save_volume(v, dir / "f1.nii.gz");
    save_image(ScalarVolume(g, 1.0f), dir / "i2.nii.gz");
    Manifest m;
    ScanEntry s;
    s.patient_id = "P1";
    s.scan_id = "S1";
    s.fusion = Fusion::RN;
    s.frames = {{fs::path("f0.nii.gz"), std::nullopt, Phase::Diastole, 0.0},
                {fs::path("f1.nii.gz"), std::nullopt, Phase::Systole, 50.0},
                {std::nullopt, fs::path("i2.nii.gz"), Phase::Systole, 70.0}};
    s.reference_diastole = 0;
    s.reference_systole = 1;
    m.scans.push_back(s);
    ScanEntry s2 = s;
    s2.patient_id = "P2";
    s2.scan_id = "S2";
    m.scans.push_back(s2);
    return m;
}

}  // namespace

TEST_CASE("manifest round-trip and series loading") {
    const auto dir = test::scratch_dir("core_manifest");
    auto m = write_tiny_dataset(dir);
    m.folds = leave_one_out_folds(m);
    REQUIRE(m.folds.size() == 2);
    CHECK(m.folds[0].held_out == std::vector<std::string>{"P1"});
    CHECK(m.folds[0].train == std::vector<std::string>{"P2"});
    save_manifest(m, dir / "manifest.json");

    const auto back = load_manifest(dir / "manifest.json");
    REQUIRE(back.scans.size() == 2);
    const auto& s = back.scan("S1");
    CHECK(s.fusion == Fusion::RN);
    CHECK(s.frames.size() == 3);
    CHECK(s.frames[2].phase == Phase::Systole);
    CHECK(s.frames[1].phase_percent == 50.0);
    CHECK(s.reference_systole == 1);
    CHECK_THROWS_AS(back.scan("nope"), Error);

    const auto series = load_series(back, s);
    CHECK(series.size() == 3);
    CHECK(series.frames[0].labels.has_value());
    CHECK_FALSE(series.frames[2].labels.has_value());
    CHECK(series.frames[2].image.has_value());
    CHECK(phase_indices(series, Phase::Systole) == std::vector<int>{1, 2});
    CHECK_THROWS_AS(split_frames(series, Phase::Systole), Error);
    CHECK(split_frames(series, Phase::Diastole).size() == 1);
}

TEST_CASE("manifest validation names the fault") {
    const auto dir = test::scratch_dir("core_manifest_bad");
    auto m = write_tiny_dataset(dir);

    auto bad = m;
    bad.scans[0].reference_systole = 0;
    save_manifest(bad, dir / "m.json");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("tagged"), Error);

    bad = m;
    bad.scans[0].frames[1].labels = fs::path("gone.nii.gz");
    save_manifest(bad, dir / "m.json");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("gone.nii.gz"), IoError);

    bad = m;
    bad.scans[1].scan_id = "S1";
    save_manifest(bad, dir / "m.json");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("duplicate scan id"), Error);

    bad = m;
    bad.folds = {{"f", {"P1"}, {"P1", "P2"}}};
    CHECK_THROWS_AS(validate_folds(bad), Error);

    {
        std::ofstream f(dir / "broken.json");
        f << "{ not json";
    }
    CHECK_THROWS_AS(load_manifest(dir / "broken.json"), IoError);
}

TEST_CASE("series validation rejects mixed geometry") {
    Series4D s;
    s.frames.resize(2);
    s.frames[0].labels = LabelVolume(test::cube_geometry(4));
    s.frames[1].labels = LabelVolume(test::cube_geometry(5));
    s.phases = {Phase::Diastole, Phase::Diastole};
    s.reference_diastole = 0;
    CHECK_THROWS_AS(s.validate(), GeometryMismatch);
}
