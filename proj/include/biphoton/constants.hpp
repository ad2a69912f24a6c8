#pragma once

#include <numbers>

namespace biphoton {

/// Speed of light in vacuum [m/s].
inline constexpr double kSpeedOfLight = 299'792'458.0;

inline constexpr double kPi = std::numbers::pi;

/// Timestamps are quantized to this grid before they enter any stream, so
/// that merges and comparisons are exact integer operations [s].
inline constexpr double kTimeGrid = 4e-12;

/// Picoseconds per second; detection timestamps are stored as integer ps.
inline constexpr double kPicosecond = 1e-12;

}  // namespace biphoton
