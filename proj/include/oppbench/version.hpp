#pragma once

namespace oppbench {

inline constexpr const char* kVersion = "0.1.0";

} // namespace oppbench
