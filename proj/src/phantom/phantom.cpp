#include "valvekit/phantom/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <fmt/format.h>

namespace valvekit {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

// Uniform [0,1) from the raw engine output so results do not depend on the
// standard library's distribution implementations.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Vec3 random_unit(std::mt19937_64& rng) {
    const double z = 2.0 * uniform01(rng) - 1.0;
    const double phi = 2.0 * kPi * uniform01(rng);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

double wrap_deg(double a) {
    a = std::fmod(a + 180.0, 360.0);
    if (a < 0) a += 360.0;
    return a - 180.0;
}

struct Sector {
    Structure cusp;
    double center;  // degrees
    double half;    // degrees
};

// Sum of random plane waves, scaled to unit RMS.
class NoiseField {
public:
    NoiseField(std::uint64_t seed, double wavelength) {
        std::mt19937_64 rng(seed);
        for (auto& w : waves_) {
            w.k = random_unit(rng) * (2.0 * kPi / wavelength);
            w.phase = 2.0 * kPi * uniform01(rng);
        }
    }

    double operator()(const Vec3& p) const {
        double s = 0.0;
        for (const auto& w : waves_) s += std::cos(w.k.dot(p) + w.phase);
        return s * std::sqrt(2.0 / kWaves);
    }

private:
    static constexpr int kWaves = 12;
    struct Wave {
        Vec3 k;
        double phase;
    };
    std::array<Wave, kWaves> waves_;
};

class RootModel {
public:
    explicit RootModel(const PhantomSpec& s) : spec_(s) {
        axis_ = s.outflow_axis.normalized();
        int least = 0;
        for (int i = 1; i < 3; ++i) {
            if (std::abs(axis_[i]) < std::abs(axis_[least])) least = i;
        }
        Vec3 v = Vec3::Unit(least);
        e1_ = (v - v.dot(axis_) * axis_).normalized();
        e2_ = axis_.cross(e1_);

        R_ = s.annulus_diameter / 2.0;
        Rw_ = R_ + s.wall_thickness;
        Hc_ = (s.cusp_geometric_height + s.root_height) / 2.0;
        pull_ = std::max(0.0, s.cusp_thickness / 2.0 - s.spacing.minCoeff() / 2.0);
        const double L = s.cusp_geometric_height;
        alpha_closed_ = std::asin(std::min(1.0, (R_ - s.coaptation_gap) / L));
        alpha_open_ = std::asin(std::min(1.0, s.open_gap / L));

        const Structure nf = non_fused_cusp(s.fusion);
        std::vector<Structure> others;
        for (auto c : kCusps) {
            if (c != nf) others.push_back(c);
        }
        const double beta = s.commissural_angle;
        const double gamma = (360.0 - beta) / 2.0;
        sectors_ = {Sector{nf, 0.0, beta / 2.0},
                    Sector{others[0], beta / 2.0 + gamma / 2.0, gamma / 2.0},
                    Sector{others[1], -(beta / 2.0 + gamma / 2.0), gamma / 2.0}};
        commissures_ = {{beta / 2.0, {nf, others[0]}},
                        {180.0, {others[0], others[1]}},
                        {-beta / 2.0, {others[1], nf}}};
    }

    const Vec3& axis() const { return axis_; }
    double outer_radius() const { return Rw_; }
    double h_min() const { return -spec_.lvo_depth - spec_.band_thickness; }
    double h_max() const { return spec_.root_height + spec_.band_thickness; }

    double alpha(double f) const { return alpha_closed_ + f * (alpha_open_ - alpha_closed_); }

    Vec3 point(double r, double theta_deg, double h) const {
        const double t = theta_deg * kDeg;
        return r * (std::cos(t) * e1_ + std::sin(t) * e2_) + h * axis_;
    }

    Vec3 nadir() const { return point(R_, 0.0, 0.0); }
    Vec3 opposite_wall() const { return point(R_, 180.0, 0.0); }

    Vec3 free_margin_center(double f) const {
        const double a = alpha(f);
        const double L = spec_.cusp_geometric_height;
        return point(R_ - L * std::sin(a), 0.0, L * std::cos(a));
    }

    std::vector<CommissureTruth> commissures() const {
        std::vector<CommissureTruth> out;
        for (const auto& [theta, pair] : commissures_) {
            out.push_back({point(R_, theta, Hc_), pair});
        }
        return out;
    }

    // Label at model-space point p (annulus center at the origin).
    LabelId classify(const Vec3& p, double open, double n) const {
        const double h = p.dot(axis_);
        const double x = p.dot(e1_);
        const double y = p.dot(e2_);
        const double r = std::hypot(x, y);
        const double zl = spec_.lvo_depth;
        const double b = spec_.band_thickness;
        const double H = spec_.root_height;

        if (std::max({h + zl, -zl - b - h, r - Rw_}) + n <= 0.0) return to_id(Structure::LVO);
        if (std::max({H - h, h - H - b, r - Rw_}) + n <= 0.0) return to_id(Structure::STJ);
        if (std::max({R_ - r, r - Rw_, -zl - h, h - H}) + n <= 0.0) {
            return to_id(Structure::RootWall);
        }
        if (r > R_ + spec_.cusp_thickness || h < -spec_.cusp_thickness || h > Hc_ + spec_.cusp_thickness) {
            return 0;
        }

        const double theta = std::atan2(y, x) / kDeg;
        for (const auto& sec : sectors_) {
            const double d = wrap_deg(theta - sec.center);
            if (d < -sec.half || d >= sec.half) continue;
            const double c = std::cos(0.5 * kPi * d / sec.half);
            const double a = alpha(open);
            const double L = spec_.cusp_geometric_height;
            const double r_fm = R_ - L * std::sin(a);
            const double h_fm = L * std::cos(a);
            const Eigen::Vector2d A(R_, Hc_ * (1.0 - c));
            const Eigen::Vector2d F(R_ - (R_ - r_fm) * c, h_fm + (Hc_ - h_fm) * (1.0 - c));
            // Capsule around the cross-section segment. The attachment end is
            // pulled in so the tissue reaches half a voxel below the attachment
            // curve, which keeps the sampled nadir layer stable.
            const double half_t = spec_.cusp_thickness / 2.0;
            const double len = (F - A).norm();
            const Eigen::Vector2d a0 =
                len > 0.0 ? Eigen::Vector2d(A + std::min(pull_, len) * (F - A) / len) : A;
            const Eigen::Vector2d v = F - a0;
            const Eigen::Vector2d q = Eigen::Vector2d(r, h) - a0;
            const double len2 = v.squaredNorm();
            const double lambda = len2 > 0.0 ? std::clamp(q.dot(v) / len2, 0.0, 1.0) : 0.0;
            const double level = (q - lambda * v).norm() - half_t;
            return level + n <= 0.0 ? to_id(sec.cusp) : 0;
        }
        return 0;
    }

private:
    const PhantomSpec& spec_;
    Vec3 axis_, e1_, e2_;
    double R_, Rw_, Hc_, pull_;
    double alpha_closed_, alpha_open_;
    std::array<Sector, 3> sectors_;
    std::vector<std::pair<double, std::pair<Structure, Structure>>> commissures_;
};

Mat3 twist_rotation(const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Forward frame motion psi: twist about the axis through the origin, then shift.
Vec3 motion_forward(const FrameMotion& m, const Vec3& axis, const Vec3& p) {
    return twist_rotation(axis, m.twist * p.dot(axis)) * p + m.translation;
}

Vec3 motion_inverse(const FrameMotion& m, const Vec3& axis, const Vec3& x) {
    const Vec3 z = x - m.translation;
    return twist_rotation(axis, -m.twist * z.dot(axis)) * z;
}

ImageGeometry make_grid(const PhantomSpec& s, const RootModel& model) {
    const Vec3& a = model.axis();
    const double h_mid = (model.h_min() + model.h_max()) / 2.0;
    const double h_half = (model.h_max() - model.h_min()) / 2.0;
    const Vec3 center = h_mid * a;
    ImageGeometry g;
    g.spacing = s.spacing;
    for (int i = 0; i < 3; ++i) {
        const double ext = std::abs(a[i]) * h_half +
                           model.outer_radius() * std::sqrt(std::max(0.0, 1.0 - a[i] * a[i])) +
                           s.motion_amplitude;
        if (s.grid_dims) {
            g.dims[i] = (*s.grid_dims)[i];
            const double margin = (g.dims[i] - 1) * s.spacing[i] / 2.0 - ext;
            if (margin < 2.0 * s.spacing[i]) {
                throw Error(fmt::format(
                    "grid too small: axis {} needs at least {} voxels for a 2-voxel margin", i,
                    static_cast<int>(std::ceil(2.0 * ext / s.spacing[i])) + 5));
            }
        } else {
            g.dims[i] = static_cast<int>(std::ceil(2.0 * ext / s.spacing[i])) + 1 +
                        2 * std::max(s.margin_voxels, 2);
        }
        // Voxel centers sit half a voxel off the annulus center so model
        // surfaces through it fall between samples.
        const double lo = center[i] - s.spacing[i] * (g.dims[i] - 1) / 2.0;
        g.origin[i] = s.spacing[i] * (std::floor(lo / s.spacing[i]) + 0.5);
    }
    return g;
}

FrameMotion make_motion(const PhantomSpec& s, const RootModel& model, std::size_t t) {
    std::mt19937_64 rng(s.motion_seed * 1000003ULL + t);
    FrameMotion m;
    const double amp = s.motion_amplitude;
    const double h_reach = std::max(std::abs(model.h_min()), std::abs(model.h_max()));
    m.translation = random_unit(rng) * (0.5 * amp * (0.5 + 0.5 * uniform01(rng)));
    const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    m.twist = sign * 0.5 * amp * (0.5 + 0.5 * uniform01(rng)) / (model.outer_radius() * h_reach);
    return m;
}

}  // namespace

void PhantomSpec::validate() const {
    auto fail = [](const std::string& what) { throw Error("degenerate phantom spec: " + what); };
    if (!(annulus_diameter > 0)) fail("annulus_diameter must be positive");
    if (!(wall_thickness > 0) || !(wall_thickness < annulus_diameter / 4.0)) {
        fail("wall_thickness must lie in (0, annulus_diameter/4)");
    }
    if (!(cusp_geometric_height > 0) || !(cusp_geometric_height < root_height)) {
        fail("cusp_geometric_height must lie in (0, root_height)");
    }
    if (fusion == Fusion::Tricuspid) {
        if (std::abs(commissural_angle - 120.0) > 1e-9) fail("tricuspid valves need a 120 degree angle");
    } else if (!(commissural_angle > 0) || commissural_angle > 180.0) {
        fail("commissural_angle must lie in (0, 180]");
    }
    if (open_fraction.empty()) fail("at least one frame is required");
    for (double f : open_fraction) {
        if (!(f >= 0.0 && f <= 1.0)) fail("open_fraction values must lie in [0, 1]");
    }
    if ((spacing.array() <= 0).any()) fail("spacing must be positive");
    if (!(outflow_axis.norm() > 1e-9)) fail("outflow_axis must be nonzero");
    if (noise < 0) fail("noise must be nonnegative");
    if (!(cusp_thickness > 0) || !(band_thickness > 0) || !(lvo_depth > 0)) {
        fail("cusp_thickness, band_thickness and lvo_depth must be positive");
    }
    if (!(coaptation_gap >= 0) || !(open_gap > 0) || open_gap >= annulus_diameter / 2.0) {
        fail("coaptation_gap/open_gap out of range");
    }
    if (motion_amplitude < 0) fail("motion_amplitude must be nonnegative");
}

DisplacementField PhantomTruth::pullback_field(std::size_t t, const ImageGeometry& g) const {
    const FrameMotion& m = frames.at(t).motion;
    DisplacementField field(g);
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const Vec3 x = g.to_physical(i, j, k);
                const Vec3 y = center + motion_inverse(m, axis, x - center);
                field.set(g.linear(i, j, k), y - x);
            }
        }
    }
    return field;
}

Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const RootModel model(spec);
    const ImageGeometry g = make_grid(spec, model);
    const Vec3& axis = model.axis();

    Phantom out;
    auto& series = out.series;
    auto& truth = out.truth;
    series.scan_id = spec.scan_id;
    series.patient_id = spec.patient_id;
    series.fusion = spec.fusion;
    truth.fusion = spec.fusion;
    truth.non_fused = non_fused_cusp(spec.fusion);
    truth.center = Vec3::Zero();
    truth.axis = axis;

    const std::size_t n = spec.open_fraction.size();
    for (std::size_t t = 0; t < n; ++t) {
        const Phase p = spec.open_fraction[t] <= 0.5 ? Phase::Diastole : Phase::Systole;
        series.phases.push_back(p);
        int& ref = p == Phase::Diastole ? series.reference_diastole : series.reference_systole;
        if (ref < 0) ref = static_cast<int>(t);
    }

    const double wavelength = 8.0 * spec.spacing.minCoeff();
    const NoiseField noise(spec.noise_seed, wavelength);
    const double noise_mm = spec.noise * spec.spacing.minCoeff();

    for (std::size_t t = 0; t < n; ++t) {
        const double f = spec.open_fraction[t];
        const bool is_ref = static_cast<int>(t) == series.reference_diastole ||
                            static_cast<int>(t) == series.reference_systole;
        FrameTruth ft;
        ft.phase = series.phases[t];
        ft.open_fraction = f;
        if (!is_ref) ft.motion = make_motion(spec, model, t);

        LabelVolume labels(g);
        for (int k = 0; k < g.dims[2]; ++k) {
            for (int j = 0; j < g.dims[1]; ++j) {
                for (int i = 0; i < g.dims[0]; ++i) {
                    const Vec3 y = motion_inverse(ft.motion, axis, g.to_physical(i, j, k));
                    const double nz = noise_mm > 0 ? noise_mm * noise(y) : 0.0;
                    labels.at(i, j, k) = model.classify(y, f, nz);
                }
            }
        }
        for (auto s : kAllStructures) {
            if (count_label(labels, to_id(s)) == 0) {
                throw Error(fmt::format("degenerate phantom spec: frame {} has no {} voxels", t,
                                        structure_name(s)));
            }
        }

        auto fwd = [&](const Vec3& p) { return motion_forward(ft.motion, axis, p); };
        ft.nadir = fwd(model.nadir());
        ft.free_margin_center = fwd(model.free_margin_center(f));
        for (auto c : model.commissures()) {
            ft.commissures.push_back({fwd(c.point), c.cusps});
        }
        ft.annulus_point = fwd(Vec3::Zero());
        ft.annulus_normal = axis;
        ft.outflow_axis = axis;
        ft.opposite_wall_point = fwd(model.opposite_wall());
        ft.annulus_diameter = (ft.opposite_wall_point - ft.nadir).norm();
        ft.geometric_cusp_height = (ft.free_margin_center - ft.nadir).norm();
        std::vector<Vec3> nf;
        for (const auto& c : ft.commissures) {
            if (c.cusps.first == truth.non_fused || c.cusps.second == truth.non_fused) {
                nf.push_back(c.point);
            }
        }
        ft.commissural_angle =
            projected_angle_deg(nf[0], nf[1], ft.annulus_point, ft.annulus_normal);
        truth.frames.push_back(std::move(ft));

        Frame frame;
        frame.labels = std::move(labels);
        frame.phase_percent = 100.0 * static_cast<double>(t) / static_cast<double>(n);
        series.frames.push_back(std::move(frame));
    }
    series.validate();
    return out;
}

LabelVolume apply_synthetic_deformation(const LabelVolume& frame,
                                        const DisplacementField& field) {
    return pull_back_labels(frame, field);
}

double voxelization_error_bound(const PhantomSpec& spec) {
    return 0.5 * spec.spacing.norm();
}

}  // namespace valvekit
