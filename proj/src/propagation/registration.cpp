#include "valvekit/propagation/registration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "json.hpp"

namespace valvekit {

namespace {

using Buffer = std::vector<float>;

// In-place 1D Gaussian along one axis, replicating border values.
void smooth_axis(Buffer& data, const Index3& dims, int axis, double sigma_vox) {
    if (sigma_vox <= 0.0 || dims[axis] < 2) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_vox)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double w = std::exp(-0.5 * t * t / (sigma_vox * sigma_vox));
        kernel[t + radius] = static_cast<float>(w);
        sum += w;
    }
    for (auto& w : kernel) w = static_cast<float>(w / sum);

    const int n = dims[axis];
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? dims[0] : static_cast<std::size_t>(dims[0]) * dims[1];
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    std::vector<float> line(n + 2 * radius);
    for (int y = 0; y < dims[a2]; ++y) {
        for (int x = 0; x < dims[a1]; ++x) {
            Index3 ijk{};
            ijk[a1] = x;
            ijk[a2] = y;
            ijk[axis] = 0;
            const std::size_t base = (static_cast<std::size_t>(ijk[2]) * dims[1] + ijk[1]) * dims[0] + ijk[0];
            for (int t = 0; t < n; ++t) line[t + radius] = data[base + t * stride];
            for (int t = 0; t < radius; ++t) {
                line[t] = line[radius];
                line[n + radius + t] = line[n + radius - 1];
            }
            for (int t = 0; t < n; ++t) {
                float s = 0.0f;
                const float* src = &line[t];
                for (int q = 0; q <= 2 * radius; ++q) s += kernel[q] * src[q];
                data[base + t * stride] = s;
            }
        }
    }
}

void smooth(Buffer& data, const ImageGeometry& g, double sigma_mm) {
    for (int a = 0; a < 3; ++a) smooth_axis(data, g.dims, a, sigma_mm / g.spacing[a]);
}

ImageGeometry half_geometry(const ImageGeometry& g) {
    ImageGeometry h = g;
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] > 1) {
            h.dims[a] = (g.dims[a] + 1) / 2;
            h.spacing[a] = 2.0 * g.spacing[a];
        }
    }
    return h;
}

Buffer downsample(Buffer src, const ImageGeometry& g, const ImageGeometry& coarse) {
    for (int a = 0; a < 3; ++a) {
        if (coarse.dims[a] != g.dims[a]) smooth_axis(src, g.dims, a, 1.0);
    }
    Buffer out(coarse.voxel_count());
    const int fx = coarse.dims[0] != g.dims[0] ? 2 : 1;
    const int fy = coarse.dims[1] != g.dims[1] ? 2 : 1;
    const int fz = coarse.dims[2] != g.dims[2] ? 2 : 1;
    for (int k = 0; k < coarse.dims[2]; ++k) {
        for (int j = 0; j < coarse.dims[1]; ++j) {
            for (int i = 0; i < coarse.dims[0]; ++i) {
                out[coarse.linear(i, j, k)] = src[g.linear(i * fx, j * fy, k * fz)];
            }
        }
    }
    return out;
}

DisplacementField upsample(const DisplacementField& coarse, const ImageGeometry& fine) {
    DisplacementField out(fine);
    const auto& cg = coarse.geometry();
    Vec3 ratio;
    for (int a = 0; a < 3; ++a) ratio[a] = cg.dims[a] != fine.dims[a] ? 0.5 : 1.0;
    for (int k = 0; k < fine.dims[2]; ++k) {
        for (int j = 0; j < fine.dims[1]; ++j) {
            for (int i = 0; i < fine.dims[0]; ++i) {
                out.set(fine.linear(i, j, k), coarse.sample(Vec3(i, j, k).cwiseProduct(ratio)));
            }
        }
    }
    return out;
}

// Trilinear samples of every channel at continuous index q, border-clamped.
void sample_channels(const std::vector<Buffer>& ch, const ImageGeometry& g, const Vec3& q,
                     std::size_t out_idx, std::vector<Buffer>& out) {
    int i0[3];
    float w[3];
    for (int a = 0; a < 3; ++a) {
        const double x = std::clamp(q[a], 0.0, static_cast<double>(g.dims[a] - 1));
        i0[a] = std::min(static_cast<int>(x), std::max(g.dims[a] - 2, 0));
        w[a] = g.dims[a] > 1 ? static_cast<float>(x - i0[a]) : 0.0f;
    }
    const int dx = g.dims[0] > 1 ? 1 : 0;
    const std::size_t dy = g.dims[1] > 1 ? static_cast<std::size_t>(g.dims[0]) : 0;
    const std::size_t dz = g.dims[2] > 1 ? static_cast<std::size_t>(g.dims[0]) * g.dims[1] : 0;
    const std::size_t b = g.linear(i0[0], i0[1], i0[2]);
    const float w000 = (1 - w[0]) * (1 - w[1]) * (1 - w[2]), w100 = w[0] * (1 - w[1]) * (1 - w[2]);
    const float w010 = (1 - w[0]) * w[1] * (1 - w[2]), w110 = w[0] * w[1] * (1 - w[2]);
    const float w001 = (1 - w[0]) * (1 - w[1]) * w[2], w101 = w[0] * (1 - w[1]) * w[2];
    const float w011 = (1 - w[0]) * w[1] * w[2], w111 = w[0] * w[1] * w[2];
    for (std::size_t c = 0; c < ch.size(); ++c) {
        const float* d = ch[c].data();
        out[c][out_idx] = w000 * d[b] + w100 * d[b + dx] + w010 * d[b + dy] + w110 * d[b + dx + dy] +
                          w001 * d[b + dz] + w101 * d[b + dx + dz] + w011 * d[b + dy + dz] +
                          w111 * d[b + dx + dy + dz];
    }
}

void demons_level(const std::vector<Buffer>& fixed, const std::vector<Buffer>& moving,
                  const ImageGeometry& g, DisplacementField& u, const RegistrationConfig& cfg,
                  int iterations, int level) {
    const std::size_t n = g.voxel_count();
    const std::size_t nc = fixed.size();
    const Mat3 to_index = g.spacing.cwiseInverse().asDiagonal() * g.direction.transpose();
    const Mat3 grad_to_phys = g.direction * g.spacing.cwiseInverse().asDiagonal();
    const double K = std::pow(cfg.step_scale * g.spacing.mean(), 2);
    const std::size_t sx = 1, sy = g.dims[0], sz = static_cast<std::size_t>(g.dims[0]) * g.dims[1];

    std::vector<Buffer> warped(nc, Buffer(n));
    std::array<Buffer, 3> du;
    for (auto& c : du) c.resize(n);
    std::vector<std::uint8_t> active(n);

    for (int it = 0; it < iterations; ++it) {
        for (int k = 0; k < g.dims[2]; ++k) {
            for (int j = 0; j < g.dims[1]; ++j) {
                for (int i = 0; i < g.dims[0]; ++i) {
                    const std::size_t idx = g.linear(i, j, k);
                    sample_channels(moving, g, Vec3(i, j, k) + to_index * u.at(idx), idx, warped);
                }
            }
        }
        for (int k = 0; k < g.dims[2]; ++k) {
            for (int j = 0; j < g.dims[1]; ++j) {
                for (int i = 0; i < g.dims[0]; ++i) {
                    const std::size_t idx = g.linear(i, j, k);
                    // Central differences of fixed + warped moving (one-sided at borders).
                    const int c[3] = {i, j, k};
                    const std::size_t stride[3] = {sx, sy, sz};
                    Vec3 num = Vec3::Zero();
                    double grad2 = 0.0, diff2 = 0.0;
                    for (std::size_t ch = 0; ch < nc; ++ch) {
                        const float* F = fixed[ch].data();
                        const float* M = warped[ch].data();
                        Vec3 gi;
                        for (int a = 0; a < 3; ++a) {
                            const bool lo = c[a] > 0, hi = c[a] < g.dims[a] - 1;
                            const std::size_t ip = hi ? idx + stride[a] : idx;
                            const std::size_t im = lo ? idx - stride[a] : idx;
                            const double span = (hi && lo) ? 2.0 : (hi || lo) ? 1.0 : 0.0;
                            gi[a] = span > 0 ? 0.5 * ((F[ip] + M[ip]) - (F[im] + M[im])) / span : 0.0;
                        }
                        const Vec3 gp = grad_to_phys * gi;
                        const double diff = static_cast<double>(F[idx]) - M[idx];
                        num += diff * gp;
                        grad2 += gp.squaredNorm();
                        diff2 += diff * diff;
                    }
                    const double den = grad2 + diff2 / K;
                    const bool on = den > 1e-12 && num.squaredNorm() > 0.0;
                    active[idx] = on;
                    for (int a = 0; a < 3; ++a) du[a][idx] = on ? static_cast<float>(num[a] / den) : 0.0f;
                }
            }
        }
        for (auto& c : du) smooth(c, g, cfg.sigma_fluid);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t idx = 0; idx < n; ++idx) {
            if (!active[idx]) continue;
            sum += std::sqrt(du[0][idx] * du[0][idx] + du[1][idx] * du[1][idx] + du[2][idx] * du[2][idx]);
            ++count;
        }
        for (int a = 0; a < 3; ++a) {
            auto& comp = u.component(a);
            for (std::size_t idx = 0; idx < n; ++idx) comp[idx] += du[a][idx];
            smooth(comp, g, cfg.sigma_elastic);
        }
        if (!u.all_finite()) {
            throw Error(fmt::format("registration diverged: non-finite displacement at level {} iteration {}",
                                    level, it));
        }
        const double mean_update = count > 0 ? sum / static_cast<double>(count) : 0.0;
        if (mean_update < cfg.tolerance) break;
    }
}

std::vector<Buffer> to_buffers(const std::vector<ScalarVolume>& v) {
    std::vector<Buffer> out;
    for (const auto& c : v) out.emplace_back(c.data().begin(), c.data().end());
    return out;
}

template <typename V>
V crop(const V& v, const Index3& lo, const Index3& dims) {
    const auto& g = v.geometry();
    ImageGeometry cg = g;
    cg.dims = dims;
    cg.origin = g.to_physical(lo[0], lo[1], lo[2]);
    V out(cg);
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) out.at(i, j, k) = v.at(lo[0] + i, lo[1] + j, lo[2] + k);
        }
    }
    return out;
}

}  // namespace

void RegistrationConfig::validate() const {
    if (n_levels < 1) throw Error("registration: n_levels must be at least 1");
    if (static_cast<int>(iterations.size()) != n_levels) {
        throw Error(fmt::format("registration: {} iteration counts for {} levels", iterations.size(), n_levels));
    }
    for (int it : iterations) {
        if (it < 1) throw Error("registration: iteration counts must be positive");
    }
    if (!(sigma_fluid > 0) || !(sigma_elastic > 0) || !(step_scale > 0) || !(tolerance > 0) ||
        !(distance_clamp > 0)) {
        throw Error("registration: sigmas, step scale, tolerance and clamp must be positive");
    }
    if (threads < 1) throw Error("registration: threads must be at least 1");
}

RegistrationConfig load_registration_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open registration config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
    }
    RegistrationConfig c;
    c.n_levels = j.value("n_levels", c.n_levels);
    c.iterations = j.value("iterations", c.iterations);
    c.sigma_fluid = j.value("sigma_fluid", c.sigma_fluid);
    c.sigma_elastic = j.value("sigma_elastic", c.sigma_elastic);
    c.step_scale = j.value("step_scale", c.step_scale);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.distance_clamp = j.value("distance_clamp", c.distance_clamp);
    c.threads = j.value("threads", c.threads);
    c.validate();
    return c;
}

DisplacementField register_deformable(const std::vector<ScalarVolume>& fixed,
                                      const std::vector<ScalarVolume>& moving,
                                      const RegistrationConfig& cfg) {
    cfg.validate();
    if (fixed.empty() || fixed.size() != moving.size()) {
        throw Error("registration needs equally many fixed and moving channels");
    }
    const ImageGeometry& g = fixed.front().geometry();
    for (const auto& c : fixed) require_same_geometry(g, c.geometry(), "registration");
    for (const auto& c : moving) require_same_geometry(g, c.geometry(), "registration");
    auto check_finite = [](const std::vector<ScalarVolume>& stack, const char* what) {
        for (std::size_t c = 0; c < stack.size(); ++c) {
            const auto data = stack[c].data();
            const auto bad = std::find_if(data.begin(), data.end(), [](float x) { return !std::isfinite(x); });
            if (bad == data.end()) continue;
            const auto [i, j, k] = stack[c].geometry().unravel(static_cast<std::size_t>(bad - data.begin()));
            throw Error(fmt::format("registration: {} channel {} has a non-finite value at voxel ({}, {}, {})", what,
                                    c, i, j, k));
        }
    };
    check_finite(fixed, "fixed");
    check_finite(moving, "moving");

    std::vector<ImageGeometry> geoms{g};
    std::vector<std::vector<Buffer>> F{to_buffers(fixed)}, M{to_buffers(moving)};
    for (int l = 1; l < cfg.n_levels; ++l) {
        const ImageGeometry& prev = geoms.back();
        const ImageGeometry next = half_geometry(prev);
        std::vector<Buffer> f, m;
        for (const auto& c : F.back()) f.push_back(downsample(c, prev, next));
        for (const auto& c : M.back()) m.push_back(downsample(c, prev, next));
        geoms.push_back(next);
        F.push_back(std::move(f));
        M.push_back(std::move(m));
    }

    DisplacementField u(geoms.back());
    for (int l = cfg.n_levels - 1; l >= 0; --l) {
        if (l != cfg.n_levels - 1) u = upsample(u, geoms[l]);
        demons_level(F[l], M[l], geoms[l], u, cfg, cfg.iterations[cfg.n_levels - 1 - l], l);
    }
    return u;
}

DisplacementField register_deformable(const LabelVolume& fixed, const LabelVolume& moving,
                                      const RegistrationConfig& cfg) {
    cfg.validate();
    require_same_geometry(fixed.geometry(), moving.geometry(), "registration");
    const auto& g = fixed.geometry();

    // Forces vanish where every distance channel is clamped, so the problem
    // is solved on the labelled bounding box plus a margin.
    Index3 lo{g.dims[0], g.dims[1], g.dims[2]}, hi{-1, -1, -1};
    for (const auto* v : {&fixed, &moving}) {
        for (std::size_t idx = 0; idx < v->size(); ++idx) {
            if ((*v)[idx] == 0) continue;
            const auto ijk = g.unravel(idx);
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], ijk[a]);
                hi[a] = std::max(hi[a], ijk[a]);
            }
        }
    }
    DisplacementField out(g);
    if (hi[0] < 0) return out;
    Index3 dims{};
    for (int a = 0; a < 3; ++a) {
        const int margin = static_cast<int>(
            std::ceil((cfg.distance_clamp + 3.0 * cfg.sigma_fluid) / g.spacing[a])) + 2;
        lo[a] = std::max(0, lo[a] - margin);
        hi[a] = std::min(g.dims[a] - 1, hi[a] + margin);
        dims[a] = hi[a] - lo[a] + 1;
    }
    const auto fc = crop(fixed, lo, dims);
    const auto mc = crop(moving, lo, dims);
    const auto u = register_deformable(distance_channels(fc, cfg.distance_clamp),
                                       distance_channels(mc, cfg.distance_clamp), cfg);
    const auto& cg = u.geometry();
    for (int k = 0; k < cg.dims[2]; ++k) {
        for (int j = 0; j < cg.dims[1]; ++j) {
            for (int i = 0; i < cg.dims[0]; ++i) {
                out.set(g.linear(lo[0] + i, lo[1] + j, lo[2] + k), u.at(cg.linear(i, j, k)));
            }
        }
    }
    return out;
}

DisplacementField register_deformable(const ScalarVolume& fixed, const ScalarVolume& moving,
                                      const RegistrationConfig& cfg) {
    return register_deformable(std::vector<ScalarVolume>{fixed}, std::vector<ScalarVolume>{moving}, cfg);
}

LabelVolume warp_labels(const LabelVolume& seg, const DisplacementField& field) {
    return pull_back_labels(seg, field);
}

}  // namespace valvekit
