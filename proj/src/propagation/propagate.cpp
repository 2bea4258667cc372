#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "valvekit/propagation/registration.hpp"

namespace valvekit {

namespace {

DisplacementField register_frame(const Frame& target, const Frame& reference,
                                 const RegistrationConfig& cfg) {
    if (target.image && reference.image) return register_deformable(*target.image, *reference.image, cfg);
    if (!target.labels) {
        throw Error("frame has no labels and the pair lacks grayscale images");
    }
    return register_deformable(*target.labels, *reference.labels, cfg);
}

}  // namespace

PropagationResult propagate_phase(const Series4D& series, Phase phase, const RegistrationConfig& cfg) {
    cfg.validate();
    series.validate();
    const int ref = series.reference_index(phase);
    if (ref < 0) throw Error(fmt::format("series {} has no {} reference", series.scan_id, phase_name(phase)));
    const Frame& reference = series.frames[ref];

    PropagationResult result;
    result.series = series;
    result.fields.resize(series.size());

    std::vector<int> todo;
    for (int t : phase_indices(series, phase)) {
        if (t != ref) todo.push_back(t);
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    auto worker = [&] {
        for (std::size_t n = next++; n < todo.size(); n = next++) {
            const int t = todo[n];
            try {
                auto field = register_frame(series.frames[t], reference, cfg);
                auto labels = warp_labels(*reference.labels, field);
                std::lock_guard lock(mu);
                result.series.frames[t].labels = std::move(labels);
                result.fields[t] = std::move(field);
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                result.failures.push_back({t, e.what()});
            }
        }
    };
    const int n_threads = std::min<int>(cfg.threads, static_cast<int>(todo.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (!result.failures.empty()) {
        std::sort(result.failures.begin(), result.failures.end(),
                  [](const FrameFailure& a, const FrameFailure& b) { return a.frame < b.frame; });
        std::string msg = fmt::format("propagation failed for {} of {} frame(s):", result.failures.size(),
                                      todo.size());
        for (const auto& f : result.failures) msg += fmt::format("\n  frame {}: {}", f.frame, f.message);
        throw PropagationError(msg, std::move(result));
    }
    return result;
}

}  // namespace valvekit
