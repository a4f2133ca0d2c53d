#pragma once

namespace rectiwarp {

inline constexpr const char *kVersion = "0.1.0";

} // namespace rectiwarp
