#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "valvekit/core/manifest.hpp"
#include "valvekit/core/volume_io.hpp"
#include "valvekit/metrics/evaluate.hpp"
#include "valvekit/metrics/overlap.hpp"
#include "valvekit/metrics/surface.hpp"
#include "valvekit/morphometry/landmarks.hpp"
#include "valvekit/phantom/phantom_io.hpp"
#include "valvekit/propagation/registration.hpp"
#include "valvekit/stats/records_io.hpp"
#include "valvekit/stats/report.hpp"

namespace fs = std::filesystem;
using namespace valvekit;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDegenerate = 3;

void emit(const std::string& out, const std::string& text) {
    if (out == "-") {
        std::cout << text;
    } else {
        if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
        write_text_file(out, text);
    }
}

TableFormat format_for(const std::string& requested, const std::string& out) {
    if (!requested.empty()) return table_format_from_name(requested);
    const auto ext = fs::path(out).extension().string();
    if (ext == ".csv") return TableFormat::Csv;
    if (ext == ".json") return TableFormat::Json;
    return TableFormat::Markdown;
}

std::vector<Phase> phases_from_option(const std::string& s) {
    if (s == "both") return {Phase::Diastole, Phase::Systole};
    auto p = phase_from_name(s);
    if (!p) throw Error(fmt::format("unknown phase '{}' (expected diastole, systole or both)", s));
    return {*p};
}

std::vector<const ScanEntry*> select_scans(const Manifest& m, const std::string& scan_id) {
    std::vector<const ScanEntry*> out;
    if (!scan_id.empty()) {
        out.push_back(&m.scan(scan_id));
    } else {
        for (const auto& s : m.scans) out.push_back(&s);
    }
    return out;
}

std::string frame_file(std::size_t t) { return fmt::format("frame_{:02d}.nii.gz", t); }

// Prediction for frame t of a scan: <dir>/<scan_id>/frame_NN.{nii.gz,nii,mha}.
fs::path prediction_path(const fs::path& dir, const std::string& scan_id, std::size_t t) {
    const auto stem = fmt::format("frame_{:02d}", t);
    for (const char* ext : {".nii.gz", ".nii", ".mha"}) {
        const auto p = dir / scan_id / (stem + ext);
        if (fs::exists(p)) return p;
    }
    throw IoError(fmt::format("no prediction for scan {} frame {} under {}", scan_id, t, (dir / scan_id).string()));
}

template <typename Records>
std::vector<typename Records::value_type> load_all(const std::vector<std::string>& paths, Records (*load)(const fs::path&)) {
    std::vector<typename Records::value_type> out;
    for (const auto& p : paths) {
        auto r = load(p);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

int run_phantom(const std::string& spec_path, const std::string& out_dir, std::optional<double> noise,
                std::optional<std::uint64_t> seed) {
    PhantomSpec spec = spec_path.empty() ? PhantomSpec{} : load_phantom_spec(spec_path);
    if (noise) spec.noise = *noise;
    if (seed) spec.noise_seed = *seed;
    spec.validate();
    const auto ph = generate_phantom(spec);
    save_phantom(ph, out_dir);
    fmt::print("wrote {} frames of {} to {}\n", ph.series.size(), ph.series.scan_id, out_dir);
    return 0;
}

int run_propagate(const std::string& manifest_path, const std::string& scan_id, const std::string& phase,
                  const std::string& config_path, const std::string& out_dir, bool save_fields, int threads) {
    const auto m = load_manifest(manifest_path);
    RegistrationConfig cfg = config_path.empty() ? RegistrationConfig{} : load_registration_config(config_path);
    if (threads > 0) cfg.threads = threads;
    cfg.validate();
    Manifest out;
    out.base_dir = out_dir;
    int failures = 0;
    for (const auto* scan : select_scans(m, scan_id)) {
        Series4D series = load_series(m, *scan);
        const fs::path dir = fs::path(out_dir) / scan->scan_id;
        fs::create_directories(dir);
        std::vector<std::optional<DisplacementField>> fields(series.size());
        for (Phase p : phases_from_option(phase)) {
            if (series.reference_index(p) < 0) {
                fmt::print(stderr, "scan {}: no {} reference, skipped\n", scan->scan_id, phase_name(p));
                continue;
            }
            PropagationResult r;
            try {
                r = propagate_phase(series, p, cfg);
            } catch (const PropagationError& e) {
                fmt::print(stderr, "scan {}: {}\n", scan->scan_id, e.what());
                r = e.partial();
                failures += static_cast<int>(r.failures.size());
            }
            for (std::size_t t = 0; t < series.size(); ++t) {
                if (series.phases[t] != p) continue;
                bool failed = false;
                for (const auto& f : r.failures) failed = failed || f.frame == static_cast<int>(t);
                if (failed) continue;
                series.frames[t].labels = r.series.frames[t].labels;
                if (r.fields[t].size() > 0) fields[t] = r.fields[t];
            }
        }
        ScanEntry entry = *scan;
        entry.frames.clear();
        for (std::size_t t = 0; t < series.size(); ++t) {
            FrameEntry fe;
            fe.phase = series.phases[t];
            fe.phase_percent = series.frames[t].phase_percent;
            if (series.frames[t].labels) {
                save_volume(*series.frames[t].labels, dir / frame_file(t));
                fe.labels = fs::path(scan->scan_id) / frame_file(t);
            }
            if (save_fields && fields[t]) {
                const auto& u = *fields[t];
                save_vector_image(u.component_volume(0), u.component_volume(1), u.component_volume(2),
                                  dir / fmt::format("field_{:02d}.nii.gz", t));
            }
            if (scan->frames[t].image) fe.image = fs::absolute(m.resolve(*scan->frames[t].image));
            entry.frames.push_back(std::move(fe));
        }
        out.scans.push_back(std::move(entry));
        fmt::print("propagated scan {} into {}\n", scan->scan_id, dir.string());
    }
    save_manifest(out, fs::path(out_dir) / "manifest.json");
    return failures > 0 ? kExitError : 0;
}

int run_evaluate(const std::string& manifest_path, const std::string& pred_dir, const std::string& scan_id,
                 const std::vector<std::string>& outs, const std::string& orientation_out,
                 const std::string& mesh_dir) {
    const auto m = load_manifest(manifest_path);
    std::vector<MetricRecord> records;
    std::vector<OrientationRecord> orientation;
    for (const auto* scan : select_scans(m, scan_id)) {
        for (std::size_t t = 0; t < scan->frames.size(); ++t) {
            const auto& fe = scan->frames[t];
            if (!fe.labels) continue;
            const auto truth = load_volume(m.resolve(*fe.labels));
            const auto pred = load_volume(prediction_path(pred_dir, scan->scan_id, t));
            const int frame = static_cast<int>(t);
            FrameEvaluation ev;
            try {
                ev = evaluate_frame(pred, truth, scan->scan_id, frame, fe.phase);
            } catch (const Error& e) {
                throw Error(fmt::format("scan {} frame {}: {}", scan->scan_id, t, e.what()));
            }
            records.insert(records.end(), ev.records.begin(), ev.records.end());
            orientation.push_back({scan->scan_id, frame, ev.orientation.offset_angle, ev.orientation.flipped});
            if (!mesh_dir.empty()) {
                const fs::path dir = fs::path(mesh_dir) / scan->scan_id;
                fs::create_directories(dir);
                for (Structure s : kScoredStructures) {
                    const auto name = structure_name(s);
                    save_obj(extract_surface(truth, to_id(s)), dir / fmt::format("frame_{:02d}_{}_truth.obj", t, name));
                    save_obj(extract_surface(pred, to_id(s)), dir / fmt::format("frame_{:02d}_{}_pred.obj", t, name));
                }
            }
        }
    }
    for (const auto& out : outs) {
        if (out == "-") {
            std::cout << metric_records_csv(records);
        } else {
            save_metric_records(out, records);
        }
    }
    if (!orientation_out.empty()) save_orientation_records(orientation_out, orientation);
    fmt::print(stderr, "evaluated {} frame(s), {} record(s)\n", orientation.size(), records.size());
    return 0;
}

int run_ensemble(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<LabelVolume> vols;
    for (const auto& p : inputs) vols.push_back(load_volume(p));
    save_volume(majority_vote(vols), out);
    return 0;
}

int run_measure(const std::string& manifest_path, const std::string& volume, const std::string& pred_dir,
                const std::string& scan_id, const std::string& source_opt, const std::string& fusion_opt,
                const std::string& out, const std::string& landmark_dir, const MorphometryConfig& cfg) {
    std::optional<MeasurementSource> source;
    if (!source_opt.empty()) {
        source = source_from_name(source_opt);
        if (!source) throw Error(fmt::format("unknown source '{}' (expected GroundTruth or Predicted)", source_opt));
    }
    std::vector<MeasurementRecord> records;
    auto measure_one = [&](const LabelVolume& v, Fusion fusion, const std::string& id, int frame,
                           MeasurementSource src) {
        records.push_back(measure_frame(v, fusion, id, frame, src, cfg));
        if (!landmark_dir.empty()) {
            fs::create_directories(landmark_dir);
            write_text_file(fs::path(landmark_dir) / fmt::format("{}_frame_{:02d}_{}.json", id, frame, source_name(src)),
                            landmarks_to_json(extract_landmarks(v, fusion, cfg)));
        }
    };
    if (!volume.empty()) {
        auto fusion = fusion_from_name(fusion_opt.empty() ? "LR" : fusion_opt);
        if (!fusion) throw Error(fmt::format("unknown fusion '{}'", fusion_opt));
        const auto id = scan_id.empty() ? fs::path(volume).stem().stem().string() : scan_id;
        measure_one(load_volume(volume), *fusion, id, 0, source.value_or(MeasurementSource::GroundTruth));
    } else {
        if (manifest_path.empty()) throw Error("measure needs --manifest or --volume");
        const auto m = load_manifest(manifest_path);
        const MeasurementSource src =
            source.value_or(pred_dir.empty() ? MeasurementSource::GroundTruth : MeasurementSource::Predicted);
        for (const auto* scan : select_scans(m, scan_id)) {
            for (std::size_t t = 0; t < scan->frames.size(); ++t) {
                const auto& fe = scan->frames[t];
                LabelVolume v;
                if (!pred_dir.empty()) {
                    v = load_volume(prediction_path(pred_dir, scan->scan_id, t));
                } else if (fe.labels) {
                    v = load_volume(m.resolve(*fe.labels));
                } else {
                    continue;
                }
                try {
                    measure_one(v, scan->fusion, scan->scan_id, static_cast<int>(t), src);
                } catch (const Error& e) {
                    throw Error(fmt::format("scan {} frame {}: {}", scan->scan_id, t, e.what()));
                }
            }
        }
    }
    if (out == "-") {
        std::cout << measurement_records_csv(records);
    } else {
        save_measurement_records(out, records);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"valvekit: 4D aortic valve segmentation analysis"};
    app.require_subcommand(1);

    // phantom
    auto* ph = app.add_subcommand("phantom", "Generate a synthetic aortic root series with ground truth");
    std::string ph_spec, ph_out;
    std::optional<double> ph_noise;
    std::optional<std::uint64_t> ph_seed;
    ph->add_option("--spec", ph_spec, "Phantom spec JSON (defaults when omitted)")->check(CLI::ExistingFile);
    ph->add_option("--out", ph_out, "Output directory")->required();
    ph->add_option("--noise", ph_noise, "Boundary jitter RMS in voxels");
    ph->add_option("--noise-seed", ph_seed, "Seed of the boundary jitter");

    // propagate
    auto* pr = app.add_subcommand("propagate", "Propagate reference labels to every frame of a phase");
    std::string pr_manifest, pr_scan, pr_phase = "both", pr_config, pr_out;
    bool pr_fields = false;
    int pr_threads = 0;
    pr->add_option("--manifest", pr_manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
    pr->add_option("--scan", pr_scan, "Only this scan id");
    pr->add_option("--phase", pr_phase, "diastole, systole or both")->capture_default_str();
    pr->add_option("--config", pr_config, "Registration config JSON")->check(CLI::ExistingFile);
    pr->add_option("--out", pr_out, "Output directory")->required();
    pr->add_flag("--save-fields", pr_fields, "Also write displacement fields as vector volumes");
    pr->add_option("--threads", pr_threads, "Frames registered concurrently (overrides config)");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score predictions against manifest labels");
    std::string ev_manifest, ev_pred, ev_scan, ev_orient, ev_meshes;
    std::vector<std::string> ev_out;
    ev->add_option("--manifest", ev_manifest, "Ground-truth manifest")->required()->check(CLI::ExistingFile);
    ev->add_option("--predictions", ev_pred, "Directory with <scan_id>/frame_NN.nii.gz")->required()->check(
        CLI::ExistingDirectory);
    ev->add_option("--scan", ev_scan, "Only this scan id");
    ev->add_option("--out", ev_out, "Metric record files (.csv or .json, '-' for stdout)")->required();
    ev->add_option("--orientation-out", ev_orient, "Orientation record file (.csv or .json)");
    ev->add_option("--meshes", ev_meshes, "Directory for OBJ surface dumps");

    // ensemble
    auto* en = app.add_subcommand("ensemble", "Per-voxel majority vote of label maps");
    std::vector<std::string> en_in;
    std::string en_out;
    en->add_option("--inputs", en_in, "Label volumes (at least two)")->required()->check(CLI::ExistingFile);
    en->add_option("--out", en_out, "Output label volume")->required();

    // measure
    auto* me = app.add_subcommand("measure", "Cusp height, annulus diameter and commissural angle");
    std::string me_manifest, me_volume, me_pred, me_scan, me_source, me_fusion, me_out, me_landmarks;
    MorphometryConfig me_cfg;
    me->add_option("--manifest", me_manifest, "Dataset manifest")->check(CLI::ExistingFile);
    me->add_option("--volume", me_volume, "Single label volume instead of a manifest")->check(CLI::ExistingFile);
    me->add_option("--predictions", me_pred, "Measure predictions <dir>/<scan_id>/frame_NN instead of labels");
    me->add_option("--scan", me_scan, "Only this scan id (or the id recorded for --volume)");
    me->add_option("--source", me_source, "GroundTruth or Predicted tag for the records");
    me->add_option("--fusion", me_fusion, "Fusion type for --volume (LR, RN, LN, Tricuspid)");
    me->add_option("--out", me_out, "Measurement record file (.csv or .json, '-' for stdout)")->required();
    me->add_option("--landmarks", me_landmarks, "Directory for landmark JSON point sets");
    me->add_flag("--outer-wall", me_cfg.outer_wall, "Measure the diameter to the outer wall boundary");

    // report
    auto* rep = app.add_subcommand("report", "Statistical reports from record files");
    rep->require_subcommand(1);
    std::vector<std::string> rep_records;
    std::string rep_out = "-", rep_format, rep_icc = "3,1", rep_group;
    bool rep_strict = false;
    double rep_z = 2.0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--records", rep_records, "Record files (.csv or .json)")->required()->check(
            CLI::ExistingFile);
        sub->add_option("--out", rep_out, "Output path ('-' for stdout)")->capture_default_str();
        sub->add_option("--format", rep_format, "md, csv or json (default from the output extension)");
        sub->add_flag("--strict", rep_strict, "Exit nonzero when a statistic is degenerate");
    };
    auto* t1 = rep->add_subcommand("table1", "Ground truth vs predicted measurement differences");
    add_common(t1);
    auto* t2 = rep->add_subcommand("table2", "Inter-rater differences and ICC");
    add_common(t2);
    bool rep_per_scan = false;
    t1->add_flag("--per-scan", rep_per_scan, "Pair per-scan means over frames instead of every frame");
    t2->add_option("--icc-model", rep_icc, "3,1 (consistency) or 2,1 (agreement)")->capture_default_str();
    auto* tt = rep->add_subcommand("temporal", "Per-frame Dice curves with dip detection");
    add_common(tt);
    tt->add_option("--z", rep_z, "Dip threshold in standard deviations")->capture_default_str();
    auto* to = rep->add_subcommand("orientation", "Outflow orientation offset summary");
    add_common(to);
    auto* ta = rep->add_subcommand("aggregate", "Metric summaries grouped by scan, label, phase or frame");
    add_common(ta);
    ta->add_option("--group-by", rep_group, "Comma-separated keys: scan,label,phase,frame");

    // plot-data
    auto* pd = app.add_subcommand("plot-data", "Per-curve (frame, dice) series as CSV");
    std::vector<std::string> pd_records;
    std::string pd_out = "-";
    pd->add_option("--records", pd_records, "Metric record files")->required()->check(CLI::ExistingFile);
    pd->add_option("--out", pd_out, "Output CSV ('-' for stdout)")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ph) return run_phantom(ph_spec, ph_out, ph_noise, ph_seed);
        if (*pr) return run_propagate(pr_manifest, pr_scan, pr_phase, pr_config, pr_out, pr_fields, pr_threads);
        if (*ev) return run_evaluate(ev_manifest, ev_pred, ev_scan, ev_out, ev_orient, ev_meshes);
        if (*en) return run_ensemble(en_in, en_out);
        if (*me) {
            return run_measure(me_manifest, me_volume, me_pred, me_scan, me_source, me_fusion, me_out, me_landmarks,
                               me_cfg);
        }
        if (*pd) {
            const auto recs = load_all(pd_records, &load_metric_records);
            emit(pd_out, render_plot_data(curves_from_records(recs)));
            return 0;
        }
        if (*rep) {
            const TableFormat fmt_ = format_for(rep_format, rep_out);
            bool degenerate = false;
            if (*t1 || *t2) {
                const auto recs = load_all(rep_records, &load_measurement_records);
                IccModel model = IccModel::Consistency31;
                if (rep_icc == "2,1") {
                    model = IccModel::Agreement21;
                } else if (rep_icc != "3,1") {
                    throw Error(fmt::format("unknown ICC model '{}' (expected 3,1 or 2,1)", rep_icc));
                }
                const auto report = measurement_comparison(recs, model, rep_per_scan ? Pairing::PerScan : Pairing::PerSegmentation);
                emit(rep_out, *t1 ? render_table1(report, fmt_) : render_table2(report, fmt_));
                degenerate = report.degenerate();
            } else if (*tt) {
                const auto recs = load_all(rep_records, &load_metric_records);
                std::vector<CurveDips> curves;
                for (auto& c : curves_from_records(recs)) {
                    auto d = detect_dips(c, rep_z);
                    degenerate = degenerate || !d.unevaluable.empty();
                    curves.push_back({std::move(c), std::move(d)});
                }
                emit(rep_out, render_temporal(curves, fmt_));
            } else if (*to) {
                const auto recs = load_all(rep_records, &load_orientation_records);
                const auto s = orientation_summary(orientation_results(recs));
                degenerate = s.angle.sd_undefined;
                emit(rep_out, render_orientation(s, fmt_));
            } else if (*ta) {
                const auto recs = load_all(rep_records, &load_metric_records);
                const auto rows = aggregate(recs, parse_group_by(rep_group));
                for (const auto& r : rows) degenerate = degenerate || r.dice.sd_undefined;
                emit(rep_out, render_aggregate(rows, fmt_));
            }
            if (degenerate) {
                fmt::print(stderr, "warning: report contains degenerate statistics\n");
                if (rep_strict) return kExitDegenerate;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitError;
    }
    return 0;
}
