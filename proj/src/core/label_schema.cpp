#include "valvekit/core/label_schema.hpp"

#include <string>

namespace valvekit {

std::string_view structure_name(Structure s) {
    switch (s) {
        case Structure::Background: return "Background";
        case Structure::LCusp: return "LCusp";
        case Structure::NCusp: return "NCusp";
        case Structure::RCusp: return "RCusp";
        case Structure::RootWall: return "RootWall";
        case Structure::LVO: return "LVO";
        case Structure::STJ: return "STJ";
    }
    return "Unknown";
}

std::string_view label_name(LabelId id) {
    auto s = structure_from_id(id);
    return s ? structure_name(*s) : std::string_view{"Unknown"};
}

std::optional<Structure> structure_from_id(int id) {
    if (!is_valid_label(id)) return std::nullopt;
    return static_cast<Structure>(id);
}

std::optional<Structure> structure_from_name(std::string_view name) {
    for (int id = 0; id <= kMaxLabelId; ++id) {
        auto s = static_cast<Structure>(id);
        if (structure_name(s) == name) return s;
    }
    return std::nullopt;
}

std::string_view fusion_name(Fusion f) {
    switch (f) {
        case Fusion::LR: return "LR";
        case Fusion::RN: return "RN";
        case Fusion::LN: return "LN";
        case Fusion::Tricuspid: return "Tricuspid";
    }
    return "Unknown";
}

std::optional<Fusion> fusion_from_name(std::string_view name) {
    if (name.ends_with("-fused")) name.remove_suffix(6);
    for (auto f : {Fusion::LR, Fusion::RN, Fusion::LN, Fusion::Tricuspid}) {
        if (fusion_name(f) == name) return f;
    }
    return std::nullopt;
}

}  // namespace valvekit
