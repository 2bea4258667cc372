#include "valvekit/metrics/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "valvekit/metrics/mesh_distance.hpp"
#include "valvekit/metrics/overlap.hpp"
#include "valvekit/metrics/surface.hpp"

namespace valvekit {

namespace {

Vec3 outflow_vector(const LabelVolume& v, const char* which) {
    for (auto s : {Structure::LVO, Structure::STJ}) {
        if (count_label(v, to_id(s)) == 0) {
            throw Error(fmt::format("{}: empty label {}", which, structure_name(s)));
        }
    }
    return centroid_mm(v, to_id(Structure::STJ)) - centroid_mm(v, to_id(Structure::LVO));
}

}  // namespace

OrientationResult outflow_orientation(const LabelVolume& pred, const LabelVolume& truth) {
    const Vec3 a = outflow_vector(pred, "prediction").normalized();
    const Vec3 b = outflow_vector(truth, "truth").normalized();
    OrientationResult r;
    r.offset_angle = std::acos(std::clamp(a.dot(b), -1.0, 1.0)) * 180.0 / M_PI;
    r.flipped = r.offset_angle > 90.0;
    return r;
}

FrameEvaluation evaluate_frame(const LabelVolume& pred, const LabelVolume& truth,
                               const std::string& scan_id, int frame, Phase phase) {
    require_same_geometry(pred.geometry(), truth.geometry(), "evaluate");
    FrameEvaluation ev;
    for (auto s : kScoredStructures) {
        const LabelId id = to_id(s);
        for (const auto* v : {&truth, &pred}) {
            if (count_label(*v, id) == 0) {
                throw Error(fmt::format("{}: empty label {}", v == &truth ? "truth" : "prediction",
                                        structure_name(s)));
            }
        }
        MetricRecord r;
        r.scan_id = scan_id;
        r.frame = frame;
        r.phase = phase;
        r.label = s;
        const auto d = dice(pred, truth, id);
        r.dice = d.value;
        r.both_empty = d.both_empty;
        const auto dist = symmetric_mesh_distance(extract_surface(pred, id), extract_surface(truth, id));
        r.mean_sym_dist = dist.mean;
        r.p95_sym_dist = dist.p95;
        ev.records.push_back(r);
    }
    ev.orientation = outflow_orientation(pred, truth);
    return ev;
}

}  // namespace valvekit
