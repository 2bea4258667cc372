#include "valvekit/morphometry/landmarks.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "json.hpp"

namespace valvekit {

namespace {

constexpr double kPi = 3.14159265358979323846;

const LabelId kWall = to_id(Structure::RootWall);
const LabelId kLvo = to_id(Structure::LVO);

Vec3 mean_of(const std::vector<Vec3>& pts) {
    Vec3 s = Vec3::Zero();
    for (const auto& p : pts) s += p;
    return s / static_cast<double>(pts.size());
}

std::size_t extreme_count(std::size_t n, double fraction) {
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
    return std::clamp<std::size_t>(k, 1, n);
}

// Azimuth (radians, [-pi, pi)) of points around a line through `c` along `axis`.
class AzimuthFrame {
public:
    AzimuthFrame(const Vec3& c, const Vec3& axis) : c_(c), axis_(axis) {
        int least = 0;
        for (int i = 1; i < 3; ++i) {
            if (std::abs(axis[i]) < std::abs(axis[least])) least = i;
        }
        const Vec3 v = Vec3::Unit(least);
        u1_ = (v - v.dot(axis) * axis).normalized();
        u2_ = axis.cross(u1_);
    }
    double operator()(const Vec3& p) const {
        const Vec3 d = p - c_;
        return std::atan2(d.dot(u2_), d.dot(u1_));
    }

private:
    Vec3 c_, axis_, u1_, u2_;
};

// Angle a measured counter-clockwise from `start`, in [0, 2pi).
double ccw_from(double start, double a) {
    double d = std::fmod(a - start, 2.0 * kPi);
    if (d < 0) d += 2.0 * kPi;
    return d;
}

struct Arc {
    double start = 0.0;
    double span = 2.0 * kPi;
};

// Smallest arc containing all azimuths: complement of the widest gap.
Arc covering_arc(std::vector<double> az) {
    std::sort(az.begin(), az.end());
    if (az.size() < 2) return {az.empty() ? 0.0 : az.front(), 0.0};
    double best_gap = az.front() + 2.0 * kPi - az.back();
    double start = az.front();
    for (std::size_t i = 1; i < az.size(); ++i) {
        const double gap = az[i] - az[i - 1];
        if (gap > best_gap) {
            best_gap = gap;
            start = az[i];
        }
    }
    return {start, 2.0 * kPi - best_gap};
}

struct Neighborhood {
    const LabelVolume& v;
    template <typename F>
    void for_each26(int i, int j, int k, F&& f) const {
        for (int dk = -1; dk <= 1; ++dk) {
            for (int dj = -1; dj <= 1; ++dj) {
                for (int di = -1; di <= 1; ++di) {
                    if (di == 0 && dj == 0 && dk == 0) continue;
                    f(i + di, j + dj, k + dk, v.at_or(i + di, j + dj, k + dk, 0));
                }
            }
        }
    }
};

struct CuspVoxels {
    std::vector<Vec3> attachment;
    std::vector<Vec3> free_margin;  // boundary, not attached
    std::vector<Vec3> all;
};

struct Candidate {
    std::size_t idx;
    LabelId label;
};

}  // namespace

const CuspLandmarks& ValveLandmarks::cusp(Structure s) const {
    for (const auto& c : cusps) {
        if (c.cusp == s) return c;
    }
    throw Error(fmt::format("no landmarks for {}", structure_name(s)));
}

std::vector<Commissure> ValveLandmarks::commissures_of(Structure s) const {
    std::vector<Commissure> out;
    for (const auto& c : commissures) {
        if (c.touches(s)) out.push_back(c);
    }
    return out;
}

ValveLandmarks extract_landmarks(const LabelVolume& v, Fusion fusion, const MorphometryConfig& cfg) {
    for (auto s : kAllStructures) {
        if (count_label(v, to_id(s)) == 0) {
            throw Error(fmt::format("empty label {}", structure_name(s)));
        }
    }
    const auto& g = v.geometry();
    ValveLandmarks lm;
    lm.non_fused = non_fused_cusp(fusion);
    lm.outflow_axis = (centroid_mm(v, to_id(Structure::STJ)) - centroid_mm(v, kLvo)).normalized();
    const Vec3 wall_centroid = centroid_mm(v, kWall);
    const Neighborhood nb{v};

    // One pass over cusp voxels: attachment, free-margin boundary and
    // commissure candidates.
    std::map<LabelId, CuspVoxels> voxels;
    std::vector<Candidate> candidates;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const LabelId id = v.at(i, j, k);
                if (!is_cusp(id)) continue;
                bool attached = false, wall = false, other_cusp = false, boundary = false;
                nb.for_each26(i, j, k, [&](int, int, int, LabelId n) {
                    if (n == kWall || n == kLvo) attached = true;
                    if (n == kWall) wall = true;
                    if (is_cusp(n) && n != id) other_cusp = true;
                });
                for (int a = 0; a < 3 && !boundary; ++a) {
                    for (int s = -1; s <= 1; s += 2) {
                        Index3 q{i, j, k};
                        q[a] += s;
                        if (v.at_or(q[0], q[1], q[2], 0) != id) boundary = true;
                    }
                }
                const Vec3 p = g.to_physical(i, j, k);
                auto& cv = voxels[id];
                cv.all.push_back(p);
                if (attached) {
                    cv.attachment.push_back(p);
                } else if (boundary) {
                    cv.free_margin.push_back(p);
                }
                if (wall && other_cusp) candidates.push_back({g.linear(i, j, k), id});
            }
        }
    }

    // Commissures: 26-connected clusters of candidates, one per cusp pair.
    std::map<std::size_t, int> cand_index;
    for (std::size_t c = 0; c < candidates.size(); ++c) cand_index[candidates[c].idx] = static_cast<int>(c);
    std::vector<int> cluster(candidates.size(), -1);
    int n_clusters = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (cluster[c] >= 0) continue;
        std::vector<int> stack{static_cast<int>(c)};
        cluster[c] = n_clusters;
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            const auto ijk = g.unravel(candidates[cur].idx);
            nb.for_each26(ijk[0], ijk[1], ijk[2], [&](int a, int b, int d, LabelId) {
                if (!g.contains(a, b, d)) return;
                auto it = cand_index.find(g.linear(a, b, d));
                if (it != cand_index.end() && cluster[it->second] < 0) {
                    cluster[it->second] = n_clusters;
                    stack.push_back(it->second);
                }
            });
        }
        ++n_clusters;
    }
    struct ClusterInfo {
        std::vector<int> members;
        std::array<int, kMaxLabelId + 1> votes{};
    };
    std::vector<ClusterInfo> clusters(n_clusters);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        auto& ci = clusters[cluster[c]];
        ci.members.push_back(static_cast<int>(c));
        ++ci.votes[candidates[c].label];
        const auto ijk = g.unravel(candidates[c].idx);
        nb.for_each26(ijk[0], ijk[1], ijk[2], [&](int, int, int, LabelId n) {
            if (is_cusp(n) && n != candidates[c].label) ++ci.votes[n];
        });
    }
    std::map<std::pair<Structure, Structure>, const ClusterInfo*> best_per_pair;
    for (const auto& ci : clusters) {
        std::array<LabelId, 3> ids{to_id(Structure::LCusp), to_id(Structure::NCusp),
                                   to_id(Structure::RCusp)};
        std::stable_sort(ids.begin(), ids.end(),
                         [&](LabelId a, LabelId b) { return ci.votes[a] > ci.votes[b]; });
        if (ci.votes[ids[1]] == 0) continue;
        auto a = static_cast<Structure>(std::min(ids[0], ids[1]));
        auto b = static_cast<Structure>(std::max(ids[0], ids[1]));
        auto& slot = best_per_pair[{a, b}];
        if (slot == nullptr || ci.members.size() > slot->members.size()) slot = &ci;
    }
    if (best_per_pair.empty()) throw Error("no commissure cluster found");
    for (const auto& [pair, ci] : best_per_pair) {
        std::vector<Vec3> pts;
        double top = -std::numeric_limits<double>::infinity();
        for (int m : ci->members) {
            const auto ijk = g.unravel(candidates[m].idx);
            pts.push_back(g.to_physical(ijk[0], ijk[1], ijk[2]));
            top = std::max(top, pts.back().dot(lm.outflow_axis));
        }
        std::vector<Vec3> at_top;
        for (const auto& p : pts) {
            if (p.dot(lm.outflow_axis) >= top - 1e-9) at_top.push_back(p);
        }
        lm.commissures.push_back({mean_of(at_top), pair});
    }

    // Nadirs.
    std::vector<Vec3> plane_pts;
    for (auto s : kCusps) {
        auto& cv = voxels[to_id(s)];
        if (cv.attachment.empty()) {
            throw Error(fmt::format("{} is not attached to the root wall", structure_name(s)));
        }
        CuspLandmarks cl;
        cl.cusp = s;
        cl.attachment = cv.attachment;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& p : cv.attachment) {
            lo = std::min(lo, p.dot(lm.outflow_axis));
            hi = std::max(hi, p.dot(lm.outflow_axis));
        }
        const double cut = lo + cfg.extreme_fraction * (hi - lo) + 1e-9;
        for (const auto& p : cv.attachment) {
            if (p.dot(lm.outflow_axis) <= cut) cl.nadir_region.push_back(p);
        }
        cl.nadir_center = mean_of(cl.nadir_region);
        plane_pts.insert(plane_pts.end(), cl.nadir_region.begin(), cl.nadir_region.end());
        lm.cusps.push_back(std::move(cl));
    }

    // Annulus plane.
    if (plane_pts.size() < 3) throw Error("degenerate plane fit: fewer than 3 nadir points");
    const Vec3 centroid = mean_of(plane_pts);
    Mat3 cov = Mat3::Zero();
    for (const auto& p : plane_pts) cov += (p - centroid) * (p - centroid).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 ev = eig.eigenvalues();
    if (!(ev[1] > 1e-9 * std::max(ev[2], 1e-300))) {
        throw Error("degenerate plane fit: nadir points are collinear");
    }
    Vec3 normal = eig.eigenvectors().col(0).normalized();
    if (normal.dot(lm.outflow_axis) < 0) normal = -normal;
    lm.plane_point = centroid;
    lm.plane_normal = normal;
    lm.annulus_center = wall_centroid - (wall_centroid - centroid).dot(normal) * normal;

    // Free-margin centers, restricted to the middle third of each cusp's arc.
    const AzimuthFrame azimuth(lm.annulus_center, normal);
    for (auto& cl : lm.cusps) {
        const auto& cv = voxels[to_id(cl.cusp)];
        auto comms = lm.commissures_of(cl.cusp);
        Arc arc;
        const double nadir_az = azimuth(cl.nadir_center);
        if (comms.size() == 2) {
            const double a0 = azimuth(comms[0].point);
            const double a1 = azimuth(comms[1].point);
            // Of the two arcs between the commissures, take the one holding the nadir.
            if (ccw_from(a0, nadir_az) <= ccw_from(a0, a1)) {
                arc = {a0, ccw_from(a0, a1)};
            } else {
                arc = {a1, ccw_from(a1, a0)};
            }
        } else {
            std::vector<double> az;
            az.reserve(cv.all.size());
            for (const auto& p : cv.all) az.push_back(azimuth(p));
            arc = covering_arc(std::move(az));
        }
        std::vector<Vec3> mid;
        for (const auto& p : cv.free_margin) {
            const double d = ccw_from(arc.start, azimuth(p));
            if (d >= arc.span / 3.0 && d <= 2.0 * arc.span / 3.0) mid.push_back(p);
        }
        if (mid.empty()) mid = cv.free_margin;
        if (mid.empty()) throw Error(fmt::format("{} has no free margin", structure_name(cl.cusp)));
        std::vector<double> dist(mid.size());
        for (std::size_t i = 0; i < mid.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& a : cv.attachment) best = std::min(best, (mid[i] - a).squaredNorm());
            dist[i] = best;
        }
        std::vector<std::size_t> order(mid.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
        const auto kn = extreme_count(order.size(), cfg.extreme_fraction);
        std::vector<Vec3> top;
        for (std::size_t i = 0; i < kn; ++i) top.push_back(mid[order[i]]);
        cl.free_margin_center = mean_of(top);
    }
    return lm;
}

double geometric_cusp_height(const ValveLandmarks& lm) {
    const auto& c = lm.cusp(lm.non_fused);
    return (c.free_margin_center - c.nadir_center).norm();
}

double annulus_diameter(const ValveLandmarks& lm, const LabelVolume& v, const MorphometryConfig& cfg) {
    const auto& g = v.geometry();
    const Vec3 start = lm.cusp(lm.non_fused).nadir_center;
    const Vec3& n = lm.plane_normal;
    Vec3 dir = lm.annulus_center - start;
    dir -= dir.dot(n) * n;
    const double to_center = dir.norm();
    if (!(to_center > 0)) throw Error("annulus center coincides with the nadir");
    dir /= to_center;
    const double step = cfg.ray_step * g.spacing.minCoeff();
    auto label_at = [&](const Vec3& p, bool& inside) -> LabelId {
        const Vec3 q = g.to_index(p);
        const int i = static_cast<int>(std::lround(q[0]));
        const int j = static_cast<int>(std::lround(q[1]));
        const int k = static_cast<int>(std::lround(q[2]));
        inside = g.contains(i, j, k);
        return inside ? v.at(i, j, k) : 0;
    };
    bool in_wall = false;
    double hit = -1.0;
    for (double t = to_center;; t += step) {
        bool inside = false;
        const LabelId id = label_at(start + t * dir, inside);
        if (!inside) break;
        // Crossings are placed halfway between the bracketing samples.
        if (id == kWall) {
            if (!cfg.outer_wall) return t - step / 2.0;
            in_wall = true;
            hit = t;
        } else if (in_wall) {
            return hit + step / 2.0;
        }
    }
    if (in_wall) return hit;
    throw Error("no wall intersection");
}

double commissural_angle(const ValveLandmarks& lm) {
    const auto comms = lm.commissures_of(lm.non_fused);
    if (comms.size() != 2) {
        throw Error(fmt::format("{} has {} adjacent commissures, expected 2",
                                structure_name(lm.non_fused), comms.size()));
    }
    return projected_angle_deg(comms[0].point, comms[1].point, lm.annulus_center, lm.plane_normal);
}

std::string_view source_name(MeasurementSource s) {
    return s == MeasurementSource::GroundTruth ? "GroundTruth" : "Predicted";
}

std::optional<MeasurementSource> source_from_name(std::string_view name) {
    if (name == "GroundTruth") return MeasurementSource::GroundTruth;
    if (name == "Predicted") return MeasurementSource::Predicted;
    return std::nullopt;
}

MeasurementRecord measure_frame(const LabelVolume& v, Fusion fusion, const std::string& scan_id,
                                int frame, MeasurementSource source, const MorphometryConfig& cfg) {
    const auto lm = extract_landmarks(v, fusion, cfg);
    MeasurementRecord r;
    r.scan_id = scan_id;
    r.frame = frame;
    r.source = source;
    r.geometric_cusp_height = geometric_cusp_height(lm);
    try {
        r.annulus_diameter = annulus_diameter(lm, v, cfg);
    } catch (const Error& e) {
        throw Error(std::string("annulus diameter: ") + e.what());
    }
    try {
        r.commissural_angle = commissural_angle(lm);
    } catch (const Error& e) {
        throw Error(std::string("commissural angle: ") + e.what());
    }
    return r;
}

std::string landmarks_to_json(const ValveLandmarks& lm) {
    using nlohmann::json;
    auto vec = [](const Vec3& p) { return json::array({p[0], p[1], p[2]}); };
    json points = json::array();
    auto add = [&](const std::string& name, const Vec3& p) {
        points.push_back({{"name", name}, {"position_mm", vec(p)}});
    };
    add("annulus_center", lm.annulus_center);
    for (const auto& c : lm.cusps) {
        const std::string n(structure_name(c.cusp));
        add(n + "_nadir", c.nadir_center);
        add(n + "_free_margin", c.free_margin_center);
    }
    for (const auto& c : lm.commissures) {
        add(fmt::format("commissure_{}_{}", structure_name(c.cusps.first),
                        structure_name(c.cusps.second)),
            c.point);
    }
    json j;
    j["units"] = "mm";
    j["non_fused_cusp"] = std::string(structure_name(lm.non_fused));
    j["outflow_axis"] = vec(lm.outflow_axis);
    j["annulus_plane"] = {{"point", vec(lm.plane_point)}, {"normal", vec(lm.plane_normal)}};
    j["points"] = points;
    return j.dump(2);
}

}  // namespace valvekit
