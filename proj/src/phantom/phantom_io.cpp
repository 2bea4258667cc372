#include "valvekit/phantom/phantom_io.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "json.hpp"
#include "valvekit/core/volume_io.hpp"

namespace valvekit {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Vec3 vec3(const json& j, const std::string& key) {
    if (j.is_number()) return Vec3::Constant(j.get<double>());
    if (!j.is_array() || j.size() != 3) throw Error(fmt::format("'{}' must be a number or a 3-array", key));
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v[0], v[1], v[2]}); }

}  // namespace

PhantomSpec phantom_spec_from_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(fmt::format("{}: invalid JSON: {}", origin, e.what()));
    }
    if (!j.is_object()) throw Error(origin + ": expected a JSON object");
    static const std::set<std::string> known{
        "annulus_diameter", "root_height", "wall_thickness", "cusp_geometric_height", "commissural_angle",
        "fusion", "open_fraction", "spacing", "outflow_axis", "noise", "noise_seed", "cusp_thickness",
        "coaptation_gap", "open_gap", "band_thickness", "lvo_depth", "motion_amplitude", "motion_seed",
        "grid_dims", "margin_voxels", "scan_id", "patient_id"};
    for (const auto& [key, value] : j.items()) {
        if (known.count(key) == 0) throw Error(fmt::format("{}: unknown field '{}'", origin, key));
    }
    PhantomSpec s;
    try {
        s.annulus_diameter = j.value("annulus_diameter", s.annulus_diameter);
        s.root_height = j.value("root_height", s.root_height);
        s.wall_thickness = j.value("wall_thickness", s.wall_thickness);
        s.cusp_geometric_height = j.value("cusp_geometric_height", s.cusp_geometric_height);
        s.commissural_angle = j.value("commissural_angle", s.commissural_angle);
        if (j.contains("fusion")) {
            const auto name = j.at("fusion").get<std::string>();
            auto f = fusion_from_name(name);
            if (!f) throw Error(fmt::format("{}: unknown fusion '{}'", origin, name));
            s.fusion = *f;
        }
        s.open_fraction = j.value("open_fraction", s.open_fraction);
        if (j.contains("spacing")) s.spacing = vec3(j.at("spacing"), "spacing");
        if (j.contains("outflow_axis")) s.outflow_axis = vec3(j.at("outflow_axis"), "outflow_axis");
        s.noise = j.value("noise", s.noise);
        s.noise_seed = j.value("noise_seed", s.noise_seed);
        s.cusp_thickness = j.value("cusp_thickness", s.cusp_thickness);
        s.coaptation_gap = j.value("coaptation_gap", s.coaptation_gap);
        s.open_gap = j.value("open_gap", s.open_gap);
        s.band_thickness = j.value("band_thickness", s.band_thickness);
        s.lvo_depth = j.value("lvo_depth", s.lvo_depth);
        s.motion_amplitude = j.value("motion_amplitude", s.motion_amplitude);
        s.motion_seed = j.value("motion_seed", s.motion_seed);
        if (j.contains("grid_dims")) {
            const auto d = j.at("grid_dims").get<std::vector<int>>();
            if (d.size() != 3) throw Error(origin + ": grid_dims must have 3 entries");
            s.grid_dims = Index3{d[0], d[1], d[2]};
        }
        s.margin_voxels = j.value("margin_voxels", s.margin_voxels);
        s.scan_id = j.value("scan_id", s.scan_id);
        s.patient_id = j.value("patient_id", s.patient_id);
    } catch (const json::exception& e) {
        throw Error(fmt::format("{}: {}", origin, e.what()));
    }
    s.validate();
    return s;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open phantom spec " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return phantom_spec_from_json(text, path.string());
}

std::string phantom_truth_json(const PhantomTruth& truth) {
    ordered_json j;
    j["fusion"] = fusion_name(truth.fusion);
    j["non_fused"] = structure_name(truth.non_fused);
    j["center"] = vec_json(truth.center);
    j["axis"] = vec_json(truth.axis);
    j["units"] = {{"length", "mm"}, {"angle", "degrees"}, {"twist", "radians per mm"}};
    j["frames"] = ordered_json::array();
    for (std::size_t t = 0; t < truth.frames.size(); ++t) {
        const auto& f = truth.frames[t];
        ordered_json jf;
        jf["frame"] = t;
        jf["phase"] = phase_name(f.phase);
        jf["open_fraction"] = f.open_fraction;
        jf["motion"] = {{"twist", f.motion.twist}, {"translation", vec_json(f.motion.translation)}};
        jf["nadir"] = vec_json(f.nadir);
        jf["free_margin_center"] = vec_json(f.free_margin_center);
        jf["commissures"] = ordered_json::array();
        for (const auto& c : f.commissures) {
            jf["commissures"].push_back({{"point", vec_json(c.point)},
                                         {"cusps", {structure_name(c.cusps.first), structure_name(c.cusps.second)}}});
        }
        jf["annulus_point"] = vec_json(f.annulus_point);
        jf["annulus_normal"] = vec_json(f.annulus_normal);
        jf["opposite_wall_point"] = vec_json(f.opposite_wall_point);
        jf["annulus_diameter"] = f.annulus_diameter;
        jf["geometric_cusp_height"] = f.geometric_cusp_height;
        jf["commissural_angle"] = f.commissural_angle;
        jf["outflow_axis"] = vec_json(f.outflow_axis);
        j["frames"].push_back(jf);
    }
    return j.dump(2) + "\n";
}

Manifest save_phantom(const Phantom& phantom, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& series = phantom.series;
    ScanEntry scan;
    scan.patient_id = series.patient_id;
    scan.scan_id = series.scan_id;
    scan.fusion = series.fusion;
    scan.reference_diastole = series.reference_diastole;
    scan.reference_systole = series.reference_systole;
    for (std::size_t t = 0; t < series.size(); ++t) {
        const auto name = fmt::format("frame_{:02d}.nii.gz", t);
        save_volume(*series.frames[t].labels, dir / name);
        FrameEntry fe;
        fe.labels = name;
        fe.phase = series.phases[t];
        fe.phase_percent = series.frames[t].phase_percent;
        scan.frames.push_back(std::move(fe));
    }
    std::ofstream truth(dir / "truth.json");
    if (!truth) throw IoError("cannot write " + (dir / "truth.json").string());
    truth << phantom_truth_json(phantom.truth);

    Manifest m;
    m.base_dir = dir;
    m.scans.push_back(std::move(scan));
    save_manifest(m, dir / "manifest.json");
    return m;
}

}  // namespace valvekit
