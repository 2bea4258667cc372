#include "valvekit/core/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "json.hpp"
#include "valvekit/core/volume_io.hpp"

namespace valvekit {

using nlohmann::json;

const ScanEntry& Manifest::scan(const std::string& scan_id) const {
    for (const auto& s : scans) {
        if (s.scan_id == scan_id) return s;
    }
    throw Error("manifest has no scan " + scan_id);
}

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
}

namespace {

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw Error(fmt::format("manifest: {} lacks field '{}'", where, key));
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(fmt::format("manifest: {} field '{}': {}", where, key, e.what()));
    }
}

ScanEntry parse_scan(const json& j, std::size_t index) {
    const std::string where = fmt::format("scans[{}]", index);
    ScanEntry s;
    s.patient_id = required<std::string>(j, "patient_id", where);
    s.scan_id = required<std::string>(j, "scan_id", where);
    if (j.contains("fusion")) {
        const auto name = j.at("fusion").get<std::string>();
        auto f = fusion_from_name(name);
        if (!f) throw Error(fmt::format("manifest: {} unknown fusion '{}'", where, name));
        s.fusion = *f;
    }
    const auto frames = required<json>(j, "frames", where);
    if (!frames.is_array() || frames.empty()) {
        throw Error(fmt::format("manifest: {} needs a nonempty frames array", where));
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& fj = frames[i];
        const std::string fwhere = fmt::format("{}.frames[{}]", where, i);
        FrameEntry f;
        if (fj.contains("labels")) f.labels = fj.at("labels").get<std::string>();
        if (fj.contains("image")) f.image = fj.at("image").get<std::string>();
        if (!f.labels && !f.image) {
            throw Error(fmt::format("manifest: {} needs 'labels' or 'image'", fwhere));
        }
        const auto phase = required<std::string>(fj, "phase", fwhere);
        auto p = phase_from_name(phase);
        if (!p) throw Error(fmt::format("manifest: {} unknown phase '{}'", fwhere, phase));
        f.phase = *p;
        if (fj.contains("phase_percent")) f.phase_percent = fj.at("phase_percent").get<double>();
        s.frames.push_back(std::move(f));
    }
    if (j.contains("reference")) {
        const auto& r = j.at("reference");
        if (r.contains("diastole")) s.reference_diastole = r.at("diastole").get<int>();
        if (r.contains("systole")) s.reference_systole = r.at("systole").get<int>();
    }
    for (Phase p : {Phase::Diastole, Phase::Systole}) {
        const int r = p == Phase::Diastole ? s.reference_diastole : s.reference_systole;
        if (r < 0) continue;
        if (r >= static_cast<int>(s.frames.size())) {
            throw Error(fmt::format("manifest: {} {} reference {} out of range", where,
                                    phase_name(p), r));
        }
        if (s.frames[r].phase != p) {
            throw Error(fmt::format("manifest: {} {} reference frame {} is tagged {}", where,
                                    phase_name(p), r, phase_name(s.frames[r].phase)));
        }
        if (!s.frames[r].labels) {
            throw Error(fmt::format("manifest: {} reference frame {} has no labels", where, r));
        }
    }
    return s;
}

}  // namespace

void validate_folds(const Manifest& m) {
    for (const auto& f : m.folds) {
        const std::set<std::string> held(f.held_out.begin(), f.held_out.end());
        for (const auto& p : f.train) {
            if (held.count(p) > 0) {
                throw Error(fmt::format("fold {}: patient {} is both held out and in training",
                                        f.name, p));
            }
        }
    }
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(fmt::format("manifest {} is not valid JSON: {}", path.string(), e.what()));
    }

    Manifest m;
    m.base_dir = path.parent_path();
    m.version = required<int>(j, "version", "manifest");
    if (m.version != kManifestVersion) {
        throw Error(fmt::format("unsupported manifest version {}", m.version));
    }
    const auto scans = required<json>(j, "scans", "manifest");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < scans.size(); ++i) {
        auto s = parse_scan(scans[i], i);
        if (!ids.insert(s.scan_id).second) throw Error("duplicate scan id " + s.scan_id);
        m.scans.push_back(std::move(s));
    }
    if (j.contains("folds")) {
        for (const auto& fj : j.at("folds")) {
            Fold f;
            f.name = fj.value("name", std::string{});
            f.held_out = required<std::vector<std::string>>(fj, "held_out", "fold");
            f.train = fj.value("train", std::vector<std::string>{});
            m.folds.push_back(std::move(f));
        }
    }
    validate_folds(m);

    std::vector<std::string> missing;
    for (const auto& s : m.scans) {
        for (const auto& f : s.frames) {
            for (const auto& p : {f.labels, f.image}) {
                if (p && !std::filesystem::exists(m.resolve(*p))) missing.push_back(p->string());
            }
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& p : missing) list += "\n  " + p;
        throw IoError(fmt::format("manifest references {} missing file(s):{}", missing.size(),
                                  list));
    }
    return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    json j;
    j["version"] = m.version;
    j["scans"] = json::array();
    for (const auto& s : m.scans) {
        json sj;
        sj["patient_id"] = s.patient_id;
        sj["scan_id"] = s.scan_id;
        sj["fusion"] = std::string(fusion_name(s.fusion));
        sj["frames"] = json::array();
        for (const auto& f : s.frames) {
            json fj;
            if (f.labels) fj["labels"] = f.labels->generic_string();
            if (f.image) fj["image"] = f.image->generic_string();
            fj["phase"] = std::string(phase_name(f.phase));
            if (f.phase_percent) fj["phase_percent"] = *f.phase_percent;
            sj["frames"].push_back(fj);
        }
        json ref = json::object();
        if (s.reference_diastole >= 0) ref["diastole"] = s.reference_diastole;
        if (s.reference_systole >= 0) ref["systole"] = s.reference_systole;
        sj["reference"] = ref;
        j["scans"].push_back(sj);
    }
    j["folds"] = json::array();
    for (const auto& f : m.folds) {
        j["folds"].push_back({{"name", f.name}, {"held_out", f.held_out}, {"train", f.train}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<Fold> leave_one_out_folds(const Manifest& m) {
    std::vector<std::string> patients;
    for (const auto& s : m.scans) {
        if (std::find(patients.begin(), patients.end(), s.patient_id) == patients.end()) {
            patients.push_back(s.patient_id);
        }
    }
    std::vector<Fold> folds;
    for (const auto& held : patients) {
        Fold f;
        f.name = "loo_" + held;
        f.held_out = {held};
        for (const auto& p : patients) {
            if (p != held) f.train.push_back(p);
        }
        folds.push_back(std::move(f));
    }
    return folds;
}

Series4D load_series(const Manifest& m, const ScanEntry& scan) {
    Series4D s;
    s.scan_id = scan.scan_id;
    s.patient_id = scan.patient_id;
    s.fusion = scan.fusion;
    s.reference_diastole = scan.reference_diastole;
    s.reference_systole = scan.reference_systole;
    for (const auto& fe : scan.frames) {
        Frame f;
        if (fe.labels) f.labels = load_volume(m.resolve(*fe.labels));
        if (fe.image) f.image = load_image(m.resolve(*fe.image));
        f.phase_percent = fe.phase_percent;
        s.frames.push_back(std::move(f));
        s.phases.push_back(fe.phase);
    }
    s.validate();
    return s;
}

}  // namespace valvekit
