#include "valvekit/metrics/overlap.hpp"

#include <array>

namespace valvekit {

DiceResult dice(const BinaryMask& a, const BinaryMask& b) {
    require_same_geometry(a.geometry(), b.geometry(), "dice");
    const auto da = a.data();
    const auto db = b.data();
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const bool x = da[i] != 0;
        const bool y = db[i] != 0;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return {1.0, true};
    return {2.0 * static_cast<double>(both) / static_cast<double>(na + nb), false};
}

DiceResult dice(const LabelVolume& a, const LabelVolume& b, LabelId id) {
    return dice(label_mask(a, id), label_mask(b, id));
}

LabelVolume majority_vote(std::span<const LabelVolume> preds) {
    if (preds.size() < 2) throw Error("majority vote needs at least 2 inputs");
    for (std::size_t p = 1; p < preds.size(); ++p) {
        require_same_geometry(preds[0].geometry(), preds[p].geometry(), "majority vote");
    }
    LabelVolume out(preds[0].geometry());
    std::array<int, kMaxLabelId + 1> votes{};
    for (std::size_t i = 0; i < out.size(); ++i) {
        votes.fill(0);
        for (const auto& p : preds) {
            const LabelId id = p[i];
            if (!is_valid_label(id)) throw Error("majority vote input holds an unknown label id");
            ++votes[id];
        }
        LabelId best = 0;
        for (LabelId id = 1; id <= kMaxLabelId; ++id) {
            if (votes[id] > votes[best]) best = id;
        }
        out[i] = best;
    }
    return out;
}

}  // namespace valvekit
