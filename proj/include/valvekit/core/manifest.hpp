#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "valvekit/core/series.hpp"

namespace valvekit {

inline constexpr int kManifestVersion = 1;

struct FrameEntry {
    std::optional<std::filesystem::path> labels;
    std::optional<std::filesystem::path> image;
    Phase phase = Phase::Diastole;
    /// Opaque position in the cardiac cycle; stored, never interpreted.
    std::optional<double> phase_percent;
};

struct ScanEntry {
    std::string patient_id;
    std::string scan_id;
    Fusion fusion = Fusion::LR;
    std::vector<FrameEntry> frames;
    int reference_diastole = -1;
    int reference_systole = -1;
};

/// Leave-one-out bookkeeping: one held-out patient set per fold.
struct Fold {
    std::string name;
    std::vector<std::string> held_out;
    std::vector<std::string> train;
};

/// Dataset description. Frame paths are stored as written in the JSON and
/// resolved against `base_dir` on load.
struct Manifest {
    int version = kManifestVersion;
    std::filesystem::path base_dir;
    std::vector<ScanEntry> scans;
    std::vector<Fold> folds;

    const ScanEntry& scan(const std::string& scan_id) const;
    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Parses and validates a manifest: schema version, phase tags, reference
/// indices, existence of every referenced file, and fold disjointness.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes `m` as JSON. Paths are written verbatim (callers pass paths relative
/// to the manifest's directory).
void save_manifest(const Manifest& m, const std::filesystem::path& path);

/// Throws when a fold's held-out and training patient sets intersect.
void validate_folds(const Manifest& m);

/// One fold per distinct patient, holding that patient out and training on
/// the rest, in order of first appearance.
std::vector<Fold> leave_one_out_folds(const Manifest& m);

/// Loads every frame of a scan into memory and validates the series.
Series4D load_series(const Manifest& m, const ScanEntry& scan);

}  // namespace valvekit
