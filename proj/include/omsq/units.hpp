#pragma once

#include <numbers>

namespace omsq {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// CODATA 2018 exact / recommended values.
inline constexpr double kHbar = 1.054571817e-34;   // J s
inline constexpr double kBoltzmann = 1.380649e-23; // J/K

constexpr double hz_to_rad(double hz) { return kTwoPi * hz; }
constexpr double rad_to_hz(double rad_per_s) { return rad_per_s / kTwoPi; }

} // namespace omsq
