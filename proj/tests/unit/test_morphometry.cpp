#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Geometry>


#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "valvekit/morphometry/landmarks.hpp"
#include "valvekit/phantom/phantom.hpp"

using namespace valvekit;

namespace {

// Same content on a grid padded by `pad` voxels on the low side of every
// axis, with the origin moved so physical positions are unchanged, then
// shifted rigidly by `offset` mm.
LabelVolume pad_and_shift(const LabelVolume& v, int pad, const Vec3& offset) {
    ImageGeometry g = v.geometry();
    g.dims = {g.dims[0] + 2 * pad, g.dims[1] + 2 * pad, g.dims[2] + 2 * pad};
    g.origin = v.geometry().to_physical(Vec3::Constant(-pad)) + offset;
    LabelVolume out(g);
    const auto& d = v.dims();
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) out.at(i + pad, j + pad, k + pad) = v.at(i, j, k);
    return out;
}

Phantom closed_and_open(double angle = 160.0, Fusion fusion = Fusion::LR) {
    PhantomSpec s;
    s.commissural_angle = angle;
    s.fusion = fusion;
    s.open_fraction = {0.0, 1.0};
    return generate_phantom(s);
}

}  // namespace

TEST_CASE("phantom measurements are recovered in closed and open states") {
    const auto ph = closed_and_open();
    for (std::size_t t = 0; t < ph.series.size(); ++t) {
        CAPTURE(t);
        const auto& v = *ph.series.frames[t].labels;
        const auto& truth = ph.truth.frames[t];
        const auto r = measure_frame(v, ph.series.fusion, "p", static_cast<int>(t));
        CHECK(std::abs(r.geometric_cusp_height - truth.geometric_cusp_height) <= 1.0);
        CHECK(std::abs(r.annulus_diameter - truth.annulus_diameter) <= 1.0);
        CHECK(std::abs(r.commissural_angle - truth.commissural_angle) <= 5.0);
        CHECK(r.scan_id == "p");
        CHECK(r.frame == static_cast<int>(t));
        CHECK(r.source == MeasurementSource::GroundTruth);
        const auto lm = extract_landmarks(v, ph.series.fusion);
        CHECK(lm.commissures.size() == 3);
        CHECK(lm.non_fused == Structure::NCusp);
        CHECK(lm.plane_normal.dot(truth.outflow_axis) > std::cos(5.0 * M_PI / 180.0));
    }
}

TEST_CASE("measurements do not depend on grid padding or rigid translation") {
    const auto ph = closed_and_open();
    const auto& v = *ph.series.frames[0].labels;
    const auto base = measure_frame(v, Fusion::LR);
    const auto moved = measure_frame(pad_and_shift(v, 3, Vec3(12.5, -40.0, 7.25)), Fusion::LR);
    CHECK(moved.geometric_cusp_height == doctest::Approx(base.geometric_cusp_height).epsilon(1e-9));
    CHECK(moved.annulus_diameter == doctest::Approx(base.annulus_diameter).epsilon(1e-9));
    CHECK(moved.commissural_angle == doctest::Approx(base.commissural_angle).epsilon(1e-9));
}

TEST_CASE("measurements are invariant to a grid rotation") {
    const auto ph = closed_and_open();
    LabelVolume v = *ph.series.frames[0].labels;
    const auto base = measure_frame(v, Fusion::LR);
    ImageGeometry g = v.geometry();
    const Mat3 rot = Eigen::AngleAxisd(0.7, Vec3(1, -2, 0.5).normalized()).toRotationMatrix();
    g.direction = rot * g.direction;
    g.origin = rot * g.origin;
    const LabelVolume rotated(g, std::vector<LabelId>(v.data().begin(), v.data().end()));
    const auto r = measure_frame(rotated, Fusion::LR);
    CHECK(r.geometric_cusp_height == doctest::Approx(base.geometric_cusp_height).epsilon(1e-9));
    CHECK(r.annulus_diameter == doctest::Approx(base.annulus_diameter).epsilon(1e-6));
    CHECK(r.commissural_angle == doctest::Approx(base.commissural_angle).epsilon(1e-9));
}

TEST_CASE("non-fused cusp follows the fusion type") {
    for (Fusion f : {Fusion::RN, Fusion::LN}) {
        const auto ph = closed_and_open(150.0, f);
        const auto& v = *ph.series.frames[0].labels;
        const auto lm = extract_landmarks(v, f);
        CHECK(lm.non_fused == non_fused_cusp(f));
        CHECK(std::abs(commissural_angle(lm) - 150.0) <= 5.0);
    }
}

TEST_CASE("outer-wall diameter adds the wall thickness") {
    const auto ph = closed_and_open();
    const auto& v = *ph.series.frames[0].labels;
    MorphometryConfig outer;
    outer.outer_wall = true;
    const auto lm = extract_landmarks(v, Fusion::LR);
    const double inner_d = annulus_diameter(lm, v);
    const double outer_d = annulus_diameter(lm, v, outer);
    CHECK(outer_d - inner_d == doctest::Approx(2.0).epsilon(0.5));
}

TEST_CASE("landmark JSON lists labelled points") {
    const auto ph = closed_and_open();
    const auto lm = extract_landmarks(*ph.series.frames[0].labels, Fusion::LR);
    const auto j = nlohmann::json::parse(landmarks_to_json(lm));
    CHECK(j.at("units") == "mm");
    CHECK(j.at("non_fused_cusp") == "NCusp");
    std::set<std::string> names;
    for (const auto& p : j.at("points")) {
        names.insert(p.at("name").get<std::string>());
        CHECK(p.at("position_mm").size() == 3);
    }
    CHECK(names.count("annulus_center") == 1);
    CHECK(names.count("NCusp_nadir") == 1);
    CHECK(names.count("LCusp_free_margin") == 1);
    CHECK(std::count_if(names.begin(), names.end(), [](const std::string& n) {
              return n.rfind("commissure_", 0) == 0;
          }) == 3);
}

TEST_CASE("missing structures are reported") {
    const auto ph = closed_and_open();
    auto v = *ph.series.frames[0].labels;
    for (auto& x : v.data())
        if (x == to_id(Structure::NCusp)) x = 0;
    CHECK_THROWS_WITH_AS(measure_frame(v, Fusion::LR), doctest::Contains("NCusp"), Error);
    v = *ph.series.frames[0].labels;
    for (auto& x : v.data())
        if (x == to_id(Structure::RootWall)) x = 0;
    CHECK_THROWS_AS(measure_frame(v, Fusion::LR), Error);
}
