#include "valvekit/stats/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "valvekit/metrics/overlap.hpp"

namespace valvekit {

std::vector<TemporalCurve> temporal_curves(const Series4D& truth, const Series4D& pred) {
    if (truth.size() != pred.size()) {
        throw Error(fmt::format("temporal curve: truth has {} frames, prediction {}", truth.size(), pred.size()));
    }
    std::vector<TemporalCurve> curves;
    for (Structure s : kScoredStructures) {
        TemporalCurve c;
        c.scan_id = truth.scan_id;
        c.label = s;
        curves.push_back(std::move(c));
    }
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const auto& a = truth.frames[t].labels;
        const auto& b = pred.frames[t].labels;
        if (!a || !b) throw Error(fmt::format("temporal curve: frame {} lacks labels", t));
        for (auto& c : curves) {
            c.frames.push_back(static_cast<int>(t));
            c.dice.push_back(dice(*b, *a, to_id(c.label)).value);
            c.phases.push_back(truth.phases[t]);
        }
    }
    return curves;
}

std::vector<TemporalCurve> curves_from_records(std::span<const MetricRecord> records) {
    std::map<std::pair<std::string, int>, std::vector<const MetricRecord*>> groups;
    for (const auto& r : records) groups[{r.scan_id, static_cast<int>(r.label)}].push_back(&r);
    std::vector<TemporalCurve> curves;
    for (auto& [key, recs] : groups) {
        std::stable_sort(recs.begin(), recs.end(),
                         [](const MetricRecord* a, const MetricRecord* b) { return a->frame < b->frame; });
        TemporalCurve c;
        c.scan_id = key.first;
        c.label = static_cast<Structure>(key.second);
        for (const auto* r : recs) {
            if (!c.frames.empty() && c.frames.back() == r->frame) {
                throw Error(fmt::format("duplicate record for scan {} frame {} label {}", c.scan_id, r->frame,
                                        structure_name(c.label)));
            }
            c.frames.push_back(r->frame);
            c.dice.push_back(r->dice);
            c.phases.push_back(r->phase);
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

DipResult detect_dips(const TemporalCurve& curve, double z) {
    if (curve.phases.size() != curve.dice.size()) throw Error("temporal curve: phase tags do not match values");
    if (!(z > 0)) throw Error("dip threshold must be positive");
    DipResult out;
    const int n = static_cast<int>(curve.size());
    for (int i = 0; i < n; ++i) {
        std::vector<double> others;
        for (int j = 0; j < n; ++j) {
            if (j != i && curve.phases[j] == curve.phases[i]) others.push_back(curve.dice[j]);
        }
        if (others.size() < 2) {
            out.unevaluable.push_back(i);
            continue;
        }
        double mean = 0.0;
        for (double v : others) mean += v;
        mean /= static_cast<double>(others.size());
        double ss = 0.0;
        for (double v : others) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(others.size() - 1));
        // Values within rounding of a constant group are not dips.
        const double drop = mean - curve.dice[i];
        const double noise = 1e-12 * std::max(1.0, std::abs(mean));
        if (drop > noise && drop > z * sd) out.dips.push_back(i);
    }
    return out;
}

}  // namespace valvekit
