#include "valvekit/core/series.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

namespace valvekit {

std::string_view phase_name(Phase p) {
    return p == Phase::Diastole ? "Diastole" : "Systole";
}

std::optional<Phase> phase_from_name(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "diastole" || s == "d") return Phase::Diastole;
    if (s == "systole" || s == "s") return Phase::Systole;
    return std::nullopt;
}

const ImageGeometry& Frame::geometry() const {
    if (labels) return labels->geometry();
    if (image) return image->geometry();
    throw Error("frame holds neither labels nor an image");
}

void Series4D::validate() const {
    if (frames.empty()) throw Error(fmt::format("series {} has no frames", scan_id));
    if (phases.size() != frames.size()) {
        throw Error(fmt::format("series {}: {} phase tags for {} frames", scan_id,
                                phases.size(), frames.size()));
    }
    const ImageGeometry& g0 = frames.front().geometry();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        const ImageGeometry& g = f.geometry();
        if (!same_geometry(g0, g)) {
            throw GeometryMismatch(fmt::format(
                "series {}: frame {} geometry ({}x{}x{}) differs from frame 0 ({}x{}x{})",
                scan_id, i, g.dims[0], g.dims[1], g.dims[2], g0.dims[0], g0.dims[1],
                g0.dims[2]));
        }
        if (f.labels && f.image && !same_geometry(f.labels->geometry(), f.image->geometry())) {
            throw GeometryMismatch(
                fmt::format("series {}: frame {} labels and image differ in geometry", scan_id, i));
        }
    }
    for (Phase p : {Phase::Diastole, Phase::Systole}) {
        const int r = reference_index(p);
        if (r < 0) continue;
        if (r >= static_cast<int>(frames.size())) {
            throw Error(fmt::format("series {}: {} reference index {} out of range", scan_id,
                                    phase_name(p), r));
        }
        if (phases[r] != p) {
            throw Error(fmt::format("series {}: {} reference frame {} is tagged {}", scan_id,
                                    phase_name(p), r, phase_name(phases[r])));
        }
    }
}

std::vector<int> phase_indices(const Series4D& series, Phase phase) {
    std::vector<int> out;
    for (std::size_t i = 0; i < series.phases.size(); ++i) {
        if (series.phases[i] == phase) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<LabelVolume> split_frames(const Series4D& series, Phase phase) {
    std::vector<LabelVolume> out;
    for (int i : phase_indices(series, phase)) {
        const auto& f = series.frames[i];
        if (!f.labels) {
            throw Error(fmt::format("series {}: frame {} has no labels", series.scan_id, i));
        }
        out.push_back(*f.labels);
    }
    return out;
}

}  // namespace valvekit
