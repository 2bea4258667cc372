#include "valvekit/stats/records_io.hpp"

#include <charconv>
#include <functional>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace valvekit {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

// Header-indexed access to CSV rows with line-numbered errors.
class CsvTable {
public:
    CsvTable(const std::string& text, std::string origin) : origin_(std::move(origin)) {
        std::istringstream in(text);
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (header_.empty()) {
                header_ = split_csv_line(line);
                for (std::size_t i = 0; i < header_.size(); ++i) index_[header_[i]] = i;
                continue;
            }
            rows_.push_back({number, split_csv_line(line)});
        }
        if (header_.empty()) throw Error(origin_ + ": empty CSV");
    }

    std::size_t size() const { return rows_.size(); }
    bool has(const std::string& col) const { return index_.count(col) > 0; }
    int line(std::size_t r) const { return rows_[r].first; }

    const std::string& get(std::size_t r, const std::string& col) const {
        auto it = index_.find(col);
        if (it == index_.end()) throw Error(fmt::format("{}: missing column '{}'", origin_, col));
        const auto& cells = rows_[r].second;
        if (it->second >= cells.size()) {
            throw Error(fmt::format("{}:{}: row has {} fields, header has {}", origin_, line(r), cells.size(),
                                    header_.size()));
        }
        return cells[it->second];
    }

    double number(std::size_t r, const std::string& col) const {
        const auto& s = get(r, col);
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            throw Error(fmt::format("{}:{}: column '{}' is not a number: '{}'", origin_, line(r), col, s));
        }
        return v;
    }

    int integer(std::size_t r, const std::string& col) const {
        const auto& s = get(r, col);
        int v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            throw Error(fmt::format("{}:{}: column '{}' is not an integer: '{}'", origin_, line(r), col, s));
        }
        return v;
    }

    bool boolean(std::size_t r, const std::string& col) const {
        const auto& s = get(r, col);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw Error(fmt::format("{}:{}: column '{}' is not a boolean: '{}'", origin_, line(r), col, s));
    }

    [[noreturn]] void fail(std::size_t r, const std::string& what) const {
        throw Error(fmt::format("{}:{}: {}", origin_, line(r), what));
    }

private:
    std::string origin_;
    std::vector<std::string> header_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::pair<int, std::vector<std::string>>> rows_;
};

Structure parse_structure(const std::string& s, const std::function<void(const std::string&)>& fail) {
    if (auto v = structure_from_name(s)) return *v;
    fail(fmt::format("unknown label '{}'", s));
    return Structure::Background;
}

Phase parse_phase(const std::string& s, const std::function<void(const std::string&)>& fail) {
    if (auto p = phase_from_name(s)) return *p;
    fail(fmt::format("unknown phase '{}'", s));
    return Phase::Diastole;
}

MeasurementSource parse_source(const std::string& s, const std::function<void(const std::string&)>& fail) {
    if (auto v = source_from_name(s)) return *v;
    fail(fmt::format("unknown source '{}' (expected GroundTruth or Predicted)", s));
    return MeasurementSource::GroundTruth;
}

json parse_json_array(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(fmt::format("{}: invalid JSON: {}", origin, e.what()));
    }
    if (j.is_object() && j.contains("records")) j = j.at("records");
    if (!j.is_array()) throw Error(origin + ": expected an array of records");
    return j;
}

template <typename T>
T field(const json& j, const char* key, const std::string& origin, std::size_t i) {
    if (!j.contains(key)) throw Error(fmt::format("{}: record {} lacks '{}'", origin, i, key));
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(fmt::format("{}: record {} field '{}': {}", origin, i, key, e.what()));
    }
}

bool has_extension(const std::filesystem::path& p, const char* ext) { return p.extension() == ext; }

}  // namespace

std::vector<OrientationResult> orientation_results(std::span<const OrientationRecord> records) {
    std::vector<OrientationResult> out;
    for (const auto& r : records) out.push_back({r.offset_angle, r.flipped});
    return out;
}

std::string metric_records_csv(std::span<const MetricRecord> records) {
    std::string out = "scan_id,frame,phase,label,dice,both_empty,mean_sym_dist_mm,p95_sym_dist_mm\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{},{},{}\n", r.scan_id, r.frame, phase_name(r.phase),
                           structure_name(r.label), r.dice, r.both_empty ? "true" : "false", r.mean_sym_dist,
                           r.p95_sym_dist);
    }
    return out;
}

std::string measurement_records_csv(std::span<const MeasurementRecord> records) {
    std::string out = "scan_id,frame,source,rater,geometric_cusp_height_mm,annulus_diameter_mm,commissural_angle_deg\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r.scan_id, r.frame, source_name(r.source), r.rater.value_or(""),
                           r.geometric_cusp_height, r.annulus_diameter, r.commissural_angle);
    }
    return out;
}

std::string orientation_records_csv(std::span<const OrientationRecord> records) {
    std::string out = "scan_id,frame,offset_angle_deg,flipped\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{}\n", r.scan_id, r.frame, r.offset_angle, r.flipped ? "true" : "false");
    }
    return out;
}

std::vector<MetricRecord> parse_metric_records_csv(const std::string& text, const std::string& origin) {
    const CsvTable t(text, origin);
    std::vector<MetricRecord> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto fail = [&](const std::string& w) { t.fail(i, w); };
        MetricRecord r;
        r.scan_id = t.get(i, "scan_id");
        r.frame = t.integer(i, "frame");
        r.phase = parse_phase(t.get(i, "phase"), fail);
        r.label = parse_structure(t.get(i, "label"), fail);
        r.dice = t.number(i, "dice");
        r.both_empty = t.has("both_empty") && t.boolean(i, "both_empty");
        r.mean_sym_dist = t.number(i, "mean_sym_dist_mm");
        r.p95_sym_dist = t.number(i, "p95_sym_dist_mm");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<MeasurementRecord> parse_measurement_records_csv(const std::string& text, const std::string& origin) {
    const CsvTable t(text, origin);
    std::vector<MeasurementRecord> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto fail = [&](const std::string& w) { t.fail(i, w); };
        MeasurementRecord r;
        r.scan_id = t.get(i, "scan_id");
        r.frame = t.integer(i, "frame");
        r.source = parse_source(t.get(i, "source"), fail);
        if (t.has("rater") && !t.get(i, "rater").empty()) r.rater = t.get(i, "rater");
        r.geometric_cusp_height = t.number(i, "geometric_cusp_height_mm");
        r.annulus_diameter = t.number(i, "annulus_diameter_mm");
        r.commissural_angle = t.number(i, "commissural_angle_deg");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<OrientationRecord> parse_orientation_records_csv(const std::string& text, const std::string& origin) {
    const CsvTable t(text, origin);
    std::vector<OrientationRecord> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        OrientationRecord r;
        r.scan_id = t.get(i, "scan_id");
        r.frame = t.integer(i, "frame");
        r.offset_angle = t.number(i, "offset_angle_deg");
        r.flipped = t.boolean(i, "flipped");
        out.push_back(std::move(r));
    }
    return out;
}

std::string metric_records_json(std::span<const MetricRecord> records) {
    ordered_json j = ordered_json::array();
    for (const auto& r : records) {
        j.push_back({{"scan_id", r.scan_id},
                     {"frame", r.frame},
                     {"phase", phase_name(r.phase)},
                     {"label", structure_name(r.label)},
                     {"dice", r.dice},
                     {"both_empty", r.both_empty},
                     {"mean_sym_dist", r.mean_sym_dist},
                     {"p95_sym_dist", r.p95_sym_dist},
                     {"distance_units", "mm"}});
    }
    return j.dump(2) + "\n";
}

std::string measurement_records_json(std::span<const MeasurementRecord> records) {
    ordered_json j = ordered_json::array();
    for (const auto& r : records) {
        ordered_json jr{{"scan_id", r.scan_id},
                        {"frame", r.frame},
                        {"source", source_name(r.source)},
                        {"geometric_cusp_height", r.geometric_cusp_height},
                        {"annulus_diameter", r.annulus_diameter},
                        {"commissural_angle", r.commissural_angle},
                        {"units", {{"geometric_cusp_height", "mm"},
                                   {"annulus_diameter", "mm"},
                                   {"commissural_angle", "degrees"}}}};
        if (r.rater) jr["rater"] = *r.rater;
        j.push_back(jr);
    }
    return j.dump(2) + "\n";
}

std::string orientation_records_json(std::span<const OrientationRecord> records) {
    ordered_json j = ordered_json::array();
    for (const auto& r : records) {
        j.push_back({{"scan_id", r.scan_id},
                     {"frame", r.frame},
                     {"offset_angle", r.offset_angle},
                     {"flipped", r.flipped},
                     {"units", "degrees"}});
    }
    return j.dump(2) + "\n";
}

std::vector<MetricRecord> parse_metric_records_json(const std::string& text, const std::string& origin) {
    const json arr = parse_json_array(text, origin);
    std::vector<MetricRecord> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& j = arr[i];
        auto fail = [&](const std::string& w) { throw Error(fmt::format("{}: record {}: {}", origin, i, w)); };
        MetricRecord r;
        r.scan_id = field<std::string>(j, "scan_id", origin, i);
        r.frame = field<int>(j, "frame", origin, i);
        r.phase = parse_phase(field<std::string>(j, "phase", origin, i), fail);
        r.label = parse_structure(field<std::string>(j, "label", origin, i), fail);
        r.dice = field<double>(j, "dice", origin, i);
        r.both_empty = j.value("both_empty", false);
        r.mean_sym_dist = field<double>(j, "mean_sym_dist", origin, i);
        r.p95_sym_dist = field<double>(j, "p95_sym_dist", origin, i);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<MeasurementRecord> parse_measurement_records_json(const std::string& text, const std::string& origin) {
    const json arr = parse_json_array(text, origin);
    std::vector<MeasurementRecord> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& j = arr[i];
        auto fail = [&](const std::string& w) { throw Error(fmt::format("{}: record {}: {}", origin, i, w)); };
        MeasurementRecord r;
        r.scan_id = field<std::string>(j, "scan_id", origin, i);
        r.frame = field<int>(j, "frame", origin, i);
        r.source = parse_source(field<std::string>(j, "source", origin, i), fail);
        if (j.contains("rater") && !j.at("rater").is_null()) r.rater = field<std::string>(j, "rater", origin, i);
        r.geometric_cusp_height = field<double>(j, "geometric_cusp_height", origin, i);
        r.annulus_diameter = field<double>(j, "annulus_diameter", origin, i);
        r.commissural_angle = field<double>(j, "commissural_angle", origin, i);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<OrientationRecord> parse_orientation_records_json(const std::string& text, const std::string& origin) {
    const json arr = parse_json_array(text, origin);
    std::vector<OrientationRecord> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& j = arr[i];
        OrientationRecord r;
        r.scan_id = field<std::string>(j, "scan_id", origin, i);
        r.frame = field<int>(j, "frame", origin, i);
        r.offset_angle = field<double>(j, "offset_angle", origin, i);
        r.flipped = field<bool>(j, "flipped", origin, i);
        out.push_back(std::move(r));
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

void save_metric_records(const std::filesystem::path& path, std::span<const MetricRecord> records) {
    write_text_file(path, has_extension(path, ".json") ? metric_records_json(records) : metric_records_csv(records));
}

void save_measurement_records(const std::filesystem::path& path, std::span<const MeasurementRecord> records) {
    write_text_file(path, has_extension(path, ".json") ? measurement_records_json(records)
                                                       : measurement_records_csv(records));
}

void save_orientation_records(const std::filesystem::path& path, std::span<const OrientationRecord> records) {
    write_text_file(path, has_extension(path, ".json") ? orientation_records_json(records)
                                                       : orientation_records_csv(records));
}

std::vector<MetricRecord> load_metric_records(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    return has_extension(path, ".json") ? parse_metric_records_json(text, path.string())
                                        : parse_metric_records_csv(text, path.string());
}

std::vector<MeasurementRecord> load_measurement_records(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    return has_extension(path, ".json") ? parse_measurement_records_json(text, path.string())
                                        : parse_measurement_records_csv(text, path.string());
}

std::vector<OrientationRecord> load_orientation_records(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    return has_extension(path, ".json") ? parse_orientation_records_json(text, path.string())
                                        : parse_orientation_records_csv(text, path.string());
}

}  // namespace valvekit
