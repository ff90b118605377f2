#pragma once

#include <array>
#include <string>
#include <string_view>

#include "oppbench/errors.hpp"

namespace oppbench {

/// The three prompting strategies under evaluation.
enum class Strategy { vanilla, cot, rule_guided };

inline constexpr std::array<Strategy, 3> kAllStrategies = {Strategy::vanilla, Strategy::cot,
                                                           Strategy::rule_guided};

/// Stable identifier used in CLI flags, file outputs, and hashes.
inline std::string_view strategy_id(Strategy s) {
    switch (s) {
        case Strategy::vanilla: return "vanilla";
        case Strategy::cot: return "cot";
        case Strategy::rule_guided: return "rule_guided";
    }
    return "vanilla";
}

/// Human-facing name used in report tables.
inline std::string_view strategy_display_name(Strategy s) {
    switch (s) {
        case Strategy::vanilla: return "Vanilla";
        case Strategy::cot: return "CoT";
        case Strategy::rule_guided: return "Rule-guided";
    }
    return "Vanilla";
}

inline Strategy parse_strategy(std::string_view name) {
    for (Strategy s : kAllStrategies) {
        if (name == strategy_id(s)) return s;
    }
    throw ConfigError("unknown strategy \"" + std::string(name) +
                      "\" (want vanilla, cot, or rule_guided)");
}

/// Canonical ordering: vanilla, cot, rule_guided.
inline int strategy_rank(Strategy s) { return static_cast<int>(s); }

} // namespace oppbench
