#include "valvekit/stats/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "json.hpp"

namespace valvekit {

using nlohmann::ordered_json;

namespace {

using SegKey = std::pair<std::string, int>;  // scan, frame

std::string fixed2(double v) {
    std::string s = fmt::format("{:.2f}", v);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string column_header(Measurement m) {
    return fmt::format("{} ({})", measurement_title(m), measurement_unit(m));
}

std::string row_name(const std::string& rater) { return rater.empty() ? "Automated" : rater; }

// Markdown or CSV grid with a blank top-left corner.
std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                        TableFormat format) {
    std::string out;
    if (format == TableFormat::Markdown) {
        out += "|";
        for (const auto& h : header) out += " " + h + " |";
        out += "\n|";
        for (std::size_t i = 0; i < header.size(); ++i) out += "---|";
        out += "\n";
        for (const auto& r : rows) {
            out += "|";
            for (const auto& c : r) out += " " + c + " |";
            out += "\n";
        }
        return out;
    }
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    auto line = [&](const std::vector<std::string>& cells) {
        std::string l;
        for (std::size_t i = 0; i < cells.size(); ++i) l += (i ? "," : "") + quote(cells[i]);
        return l + "\n";
    };
    out += line(header);
    for (const auto& r : rows) out += line(r);
    return out;
}

ordered_json stats_json(const SummaryStats& s) {
    return {{"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}, {"n", s.n},
            {"sd_undefined", s.sd_undefined}};
}

std::string degeneracy_name(Degeneracy d) {
    switch (d) {
        case Degeneracy::None: return "none";
        case Degeneracy::ZeroVariance: return "zero_variance";
        case Degeneracy::NoDifference: return "no_difference";
    }
    return "none";
}

}  // namespace

std::string_view measurement_title(Measurement m) {
    switch (m) {
        case Measurement::GeometricCuspHeight: return "Geometric Cusp Height";
        case Measurement::CommissuralAngle: return "Commissural Angle";
        case Measurement::AnnulusDiameter: return "Annulus Diameter";
    }
    return "";
}

std::string_view measurement_unit(Measurement m) {
    return m == Measurement::CommissuralAngle ? "degrees" : "mm";
}

double measurement_value(const MeasurementRecord& r, Measurement m) {
    switch (m) {
        case Measurement::GeometricCuspHeight: return r.geometric_cusp_height;
        case Measurement::CommissuralAngle: return r.commissural_angle;
        case Measurement::AnnulusDiameter: return r.annulus_diameter;
    }
    return 0.0;
}

bool ComparisonReport::degenerate() const {
    for (const auto& row : table1) {
        for (const auto& c : row.cells) {
            if (c.test.degeneracy != Degeneracy::None || c.abs_difference.sd_undefined) return true;
        }
    }
    for (const auto& row : table2) {
        for (const auto& c : row.cells) {
            if (c.max_difference.sd_undefined) return true;
        }
    }
    return false;
}

ComparisonReport measurement_comparison(std::span<const MeasurementRecord> records, IccModel model,
                                        Pairing pairing) {
    if (records.empty()) throw Error("measurement comparison: no records");
    ComparisonReport report;

    // Table 1: ground truth vs prediction per rater tag.
    std::map<std::string, std::array<std::map<SegKey, const MeasurementRecord*>, 2>> by_rater;
    for (const auto& r : records) {
        auto& side = by_rater[r.rater.value_or("")][r.source == MeasurementSource::GroundTruth ? 0 : 1];
        if (!side.emplace(SegKey{r.scan_id, r.frame}, &r).second) {
            throw Error(fmt::format("duplicate {} measurement for scan {} frame {} rater {}",
                                    source_name(r.source), r.scan_id, r.frame, row_name(r.rater.value_or(""))));
        }
    }
    std::vector<std::string> unmatched;
    for (const auto& [rater, sides] : by_rater) {
        for (int s = 0; s < 2; ++s) {
            for (const auto& [key, rec] : sides[s]) {
                if (sides[1 - s].count(key) == 0) {
                    unmatched.push_back(fmt::format("{} scan {} frame {} rater {} has no {} counterpart",
                                                    source_name(rec->source), key.first, key.second,
                                                    row_name(rater), s == 0 ? "Predicted" : "GroundTruth"));
                }
            }
        }
    }
    if (!unmatched.empty()) {
        std::string msg = fmt::format("measurement comparison: {} unmatched record(s):", unmatched.size());
        for (const auto& u : unmatched) msg += "\n  " + u;
        throw Error(msg);
    }
    for (const auto& [rater, sides] : by_rater) {
        DifferenceRow row;
        row.name = row_name(rater);
        for (std::size_t m = 0; m < kMeasurements.size(); ++m) {
            std::vector<std::pair<double, double>> pairs;
            std::map<std::string, std::array<double, 3>> scan_sums;  // gt, pred, count
            for (const auto& [key, gt] : sides[0]) {
                const double a = measurement_value(*gt, kMeasurements[m]);
                const double b = measurement_value(*sides[1].at(key), kMeasurements[m]);
                if (pairing == Pairing::PerSegmentation) {
                    pairs.emplace_back(a, b);
                } else {
                    auto& acc = scan_sums[key.first];
                    acc[0] += a;
                    acc[1] += b;
                    acc[2] += 1.0;
                }
            }
            for (const auto& [scan, acc] : scan_sums) pairs.emplace_back(acc[0] / acc[2], acc[1] / acc[2]);
            std::vector<double> diffs;
            for (const auto& [a, b] : pairs) diffs.push_back(std::abs(a - b));
            row.cells[m].abs_difference = summarize(diffs);
            try {
                row.cells[m].test = paired_t_test(pairs);
            } catch (const Error& e) {
                throw Error(fmt::format("{} / {}: {}", row.name, measurement_title(kMeasurements[m]), e.what()));
            }
        }
        report.table1.push_back(std::move(row));
    }

    // Table 2: inter-rater spread and ICC per source.
    for (MeasurementSource source : {MeasurementSource::GroundTruth, MeasurementSource::Predicted}) {
        std::map<SegKey, std::map<std::string, const MeasurementRecord*>> segs;
        std::set<std::string> raters;
        for (const auto& r : records) {
            if (r.source != source || !r.rater) continue;
            segs[{r.scan_id, r.frame}][*r.rater] = &r;
            raters.insert(*r.rater);
        }
        if (raters.size() < 2) continue;
        std::vector<std::string> incomplete;
        for (const auto& [key, by] : segs) {
            if (by.size() != raters.size()) {
                incomplete.push_back(fmt::format("scan {} frame {} has {} of {} raters", key.first, key.second,
                                                 by.size(), raters.size()));
            }
        }
        if (!incomplete.empty()) {
            std::string msg = fmt::format("{} rater matrix is incomplete:", source_name(source));
            for (const auto& u : incomplete) msg += "\n  " + u;
            throw Error(msg);
        }
        RaterRow row;
        row.name = source == MeasurementSource::GroundTruth ? "Ground Truth" : "Predicted";
        for (std::size_t m = 0; m < kMeasurements.size(); ++m) {
            RaterMatrix mat;
            mat.targets = static_cast<int>(segs.size());
            mat.raters = static_cast<int>(raters.size());
            std::vector<double> spreads;
            for (const auto& [key, by] : segs) {
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (const auto& rater : raters) {
                    const double v = measurement_value(*by.at(rater), kMeasurements[m]);
                    mat.values.push_back(v);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                spreads.push_back(hi - lo);
            }
            row.cells[m].max_difference = summarize(spreads);
            try {
                row.cells[m].icc = icc(mat, model);
            } catch (const Error& e) {
                throw Error(fmt::format("{} / {}: {}", row.name, measurement_title(kMeasurements[m]), e.what()));
            }
        }
        report.table2.push_back(std::move(row));
    }
    return report;
}

TableFormat table_format_from_name(std::string_view name) {
    if (name == "md" || name == "markdown") return TableFormat::Markdown;
    if (name == "csv") return TableFormat::Csv;
    if (name == "json") return TableFormat::Json;
    throw Error(fmt::format("unknown report format '{}' (expected md, csv or json)", name));
}

std::string format_p_value(double p) {
    if (p < 0.005) return "p<0.01";
    std::string s = fmt::format("{:.2f}", p);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return "p=" + s;
}

std::string format_difference_cell(const DifferenceCell& c) {
    return fmt::format("{} ± {} ({})", fixed2(c.abs_difference.mean), fixed2(c.abs_difference.sd),
                       format_p_value(c.test.p));
}

std::string format_rater_cell(const RaterCell& c) {
    return fmt::format("{} ± {} (ICC={})", fixed2(c.max_difference.mean), fixed2(c.max_difference.sd),
                       fixed2(c.icc));
}

std::string render_table1(const ComparisonReport& r, TableFormat format) {
    if (r.table1.empty()) throw Error("table 1 has no rows");
    if (format == TableFormat::Json) {
        ordered_json j;
        j["table"] = "ground_truth_vs_predicted";
        j["statistic"] = "mean_abs_difference";
        j["rows"] = ordered_json::array();
        for (const auto& row : r.table1) {
            ordered_json jr;
            jr["name"] = row.name;
            for (std::size_t m = 0; m < kMeasurements.size(); ++m) {
                const auto& c = row.cells[m];
                ordered_json jc = stats_json(c.abs_difference);
                jc["units"] = measurement_unit(kMeasurements[m]);
                jc["t"] = std::isfinite(c.test.t) ? ordered_json(c.test.t) : ordered_json(nullptr);
                jc["p"] = c.test.p;
                jc["dof"] = c.test.dof;
                jc["degenerate"] = degeneracy_name(c.test.degeneracy);
                jc["cell"] = format_difference_cell(c);
                jr["cells"][std::string(measurement_title(kMeasurements[m]))] = jc;
            }
            j["rows"].push_back(jr);
        }
        return j.dump(2) + "\n";
    }
    std::vector<std::string> header{""};
    for (auto m : kMeasurements) header.push_back(column_header(m));
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : r.table1) {
        std::vector<std::string> cells{row.name};
        for (const auto& c : row.cells) cells.push_back(format_difference_cell(c));
        rows.push_back(std::move(cells));
    }
    return render_grid(header, rows, format);
}

std::string render_table2(const ComparisonReport& r, TableFormat format) {
    if (r.table2.empty()) throw Error("table 2 needs measurements from at least two raters");
    if (format == TableFormat::Json) {
        ordered_json j;
        j["table"] = "inter_rater";
        j["statistic"] = "mean_max_abs_difference";
        j["rows"] = ordered_json::array();
        for (const auto& row : r.table2) {
            ordered_json jr;
            jr["name"] = row.name;
            for (std::size_t m = 0; m < kMeasurements.size(); ++m) {
                const auto& c = row.cells[m];
                ordered_json jc = stats_json(c.max_difference);
                jc["units"] = measurement_unit(kMeasurements[m]);
                jc["icc"] = c.icc;
                jc["cell"] = format_rater_cell(c);
                jr["cells"][std::string(measurement_title(kMeasurements[m]))] = jc;
            }
            j["rows"].push_back(jr);
        }
        return j.dump(2) + "\n";
    }
    std::vector<std::string> header{""};
    for (auto m : kMeasurements) header.push_back(column_header(m));
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : r.table2) {
        std::vector<std::string> cells{row.name};
        for (const auto& c : row.cells) cells.push_back(format_rater_cell(c));
        rows.push_back(std::move(cells));
    }
    return render_grid(header, rows, format);
}

std::string render_orientation(const OrientationSummary& s, TableFormat format) {
    const auto& a = s.angle;
    if (format == TableFormat::Json) {
        ordered_json j = stats_json(a);
        j["units"] = "degrees";
        j["any_flipped"] = s.any_flipped;
        return j.dump(2) + "\n";
    }
    if (format == TableFormat::Csv) {
        return fmt::format("mean_deg,sd_deg,min_deg,max_deg,n,any_flipped\n{:.6f},{:.6f},{:.6f},{:.6f},{},{}\n",
                           a.mean, a.sd, a.min, a.max, a.n, s.any_flipped ? "true" : "false");
    }
    return render_grid({"", "Offset Angle (degrees)"},
                       {{"Mean ± SD", fmt::format("{} ± {}", fixed2(a.mean), fixed2(a.sd))},
                        {"Range", fmt::format("[{}, {}]", fixed2(a.min), fixed2(a.max))},
                        {"N", std::to_string(a.n)},
                        {"Flipped", s.any_flipped ? "yes" : "none"}},
                       format);
}

std::string render_temporal(std::span<const CurveDips> curves, TableFormat format) {
    if (format == TableFormat::Json) {
        ordered_json j = ordered_json::array();
        for (const auto& cd : curves) {
            ordered_json jc;
            jc["scan_id"] = cd.curve.scan_id;
            jc["label"] = structure_name(cd.curve.label);
            jc["frames"] = cd.curve.frames;
            jc["dice"] = cd.curve.dice;
            std::vector<std::string> phases;
            for (auto p : cd.curve.phases) phases.emplace_back(phase_name(p));
            jc["phases"] = phases;
            std::vector<int> dip_frames, skip_frames;
            for (int i : cd.dips.dips) dip_frames.push_back(cd.curve.frames[i]);
            for (int i : cd.dips.unevaluable) skip_frames.push_back(cd.curve.frames[i]);
            jc["dip_frames"] = dip_frames;
            jc["unevaluable_frames"] = skip_frames;
            j.push_back(jc);
        }
        return j.dump(2) + "\n";
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto& cd : curves) {
        const std::set<int> dips(cd.dips.dips.begin(), cd.dips.dips.end());
        const std::set<int> skip(cd.dips.unevaluable.begin(), cd.dips.unevaluable.end());
        for (std::size_t i = 0; i < cd.curve.size(); ++i) {
            const int pos = static_cast<int>(i);
            rows.push_back({cd.curve.scan_id, std::string(structure_name(cd.curve.label)),
                            std::to_string(cd.curve.frames[i]), std::string(phase_name(cd.curve.phases[i])),
                            fmt::format("{:.6f}", cd.curve.dice[i]), dips.count(pos) ? "true" : "false",
                            skip.count(pos) ? "true" : "false"});
        }
    }
    return render_grid({"scan_id", "label", "frame", "phase", "dice", "dip", "unevaluable"}, rows, format);
}

std::string render_aggregate(std::span<const SummaryRow> rows, TableFormat format) {
    if (format == TableFormat::Json) {
        ordered_json j = ordered_json::array();
        for (const auto& r : rows) {
            ordered_json jr;
            if (r.scan_id) jr["scan_id"] = *r.scan_id;
            if (r.frame) jr["frame"] = *r.frame;
            if (r.label) jr["label"] = structure_name(*r.label);
            if (r.phase) jr["phase"] = phase_name(*r.phase);
            jr["dice"] = stats_json(r.dice);
            jr["mean_sym_dist"] = stats_json(r.mean_sym_dist);
            jr["mean_sym_dist"]["units"] = "mm";
            jr["p95_sym_dist"] = stats_json(r.p95_sym_dist);
            jr["p95_sym_dist"]["units"] = "mm";
            j.push_back(jr);
        }
        return j.dump(2) + "\n";
    }
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows) {
        std::vector<std::string> cells{r.scan_id.value_or(""), r.frame ? std::to_string(*r.frame) : "",
                                       r.label ? std::string(structure_name(*r.label)) : "",
                                       r.phase ? std::string(phase_name(*r.phase)) : "",
                                       std::to_string(r.dice.n)};
        for (const auto* s : {&r.dice, &r.mean_sym_dist, &r.p95_sym_dist}) {
            cells.push_back(fmt::format("{:.6f}", s->mean));
            cells.push_back(fmt::format("{:.6f}", s->sd));
            cells.push_back(fmt::format("{:.6f}", s->min));
            cells.push_back(fmt::format("{:.6f}", s->max));
        }
        cells.push_back(r.dice.sd_undefined ? "true" : "false");
        out.push_back(std::move(cells));
    }
    return render_grid({"scan_id", "frame", "label", "phase", "n", "dice_mean", "dice_sd", "dice_min", "dice_max",
                        "mean_sym_dist_mm_mean", "mean_sym_dist_mm_sd", "mean_sym_dist_mm_min",
                        "mean_sym_dist_mm_max", "p95_sym_dist_mm_mean", "p95_sym_dist_mm_sd",
                        "p95_sym_dist_mm_min", "p95_sym_dist_mm_max", "sd_undefined"},
                       out, format);
}

std::string render_plot_data(std::span<const TemporalCurve> curves) {
    std::string out = "scan_id,label,frame,phase,dice\n";
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            out += fmt::format("{},{},{},{},{:.6f}\n", c.scan_id, structure_name(c.label), c.frames[i],
                               phase_name(c.phases[i]), c.dice[i]);
        }
    }
    return out;
}

}  // namespace valvekit
