#pragma once

namespace spiralmdo {

/// Standard gravitational acceleration [m/s^2], used for Isp conversions.
inline constexpr double kStandardGravity = 9.80665;

/// Solar constant at 1 AU [W/m^2].
inline constexpr double kSolarConstant = 1367.0;

/// Julian year [s]; annual rates (array degradation) use this conversion.
inline constexpr double kSecondsPerYear = 365.25 * 86400.0;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace spiralmdo
