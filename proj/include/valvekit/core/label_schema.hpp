#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace valvekit {

using LabelId = std::uint8_t;

/// The six valve structures plus background. Numeric ids are stable across
/// every file the toolkit reads or writes.
enum class Structure : LabelId {
    Background = 0,
    LCusp = 1,
    NCusp = 2,
    RCusp = 3,
    RootWall = 4,
    LVO = 5,
    STJ = 6,
};

inline constexpr LabelId kMaxLabelId = 6;
inline constexpr std::size_t kStructureCount = 6;

inline constexpr std::array<Structure, kStructureCount> kAllStructures = {
    Structure::LCusp, Structure::NCusp, Structure::RCusp,
    Structure::RootWall, Structure::LVO, Structure::STJ};

inline constexpr std::array<Structure, 3> kCusps = {
    Structure::LCusp, Structure::NCusp, Structure::RCusp};

/// Labels that receive Dice and surface-distance scores. LVO and STJ are
/// orientation demarcations and are scored through the outflow angle instead.
inline constexpr std::array<Structure, 4> kScoredStructures = {
    Structure::LCusp, Structure::NCusp, Structure::RCusp, Structure::RootWall};

constexpr LabelId to_id(Structure s) { return static_cast<LabelId>(s); }

constexpr bool is_valid_label(int id) { return id >= 0 && id <= kMaxLabelId; }

constexpr bool is_cusp(LabelId id) {
    return id == to_id(Structure::LCusp) || id == to_id(Structure::NCusp) ||
           id == to_id(Structure::RCusp);
}

/// Cusp-fusion pattern of the valve. The non-fused cusp of a bicuspid valve is
/// the one whose commissures define the commissural angle; for a tricuspid
/// valve NCusp plays that role.
enum class Fusion { LR, RN, LN, Tricuspid };

constexpr Structure non_fused_cusp(Fusion f) {
    switch (f) {
        case Fusion::LR: return Structure::NCusp;
        case Fusion::RN: return Structure::LCusp;
        case Fusion::LN: return Structure::RCusp;
        case Fusion::Tricuspid: return Structure::NCusp;
    }
    return Structure::NCusp;
}

std::string_view fusion_name(Fusion f);
/// Accepts "LR", "RN", "LN", "Tricuspid" and the "-fused" spellings.
std::optional<Fusion> fusion_from_name(std::string_view name);

std::string_view structure_name(Structure s);
std::string_view label_name(LabelId id);
std::optional<Structure> structure_from_id(int id);
std::optional<Structure> structure_from_name(std::string_view name);

}  // namespace valvekit
