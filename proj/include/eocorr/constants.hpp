#pragma once

#include <numbers>

namespace eocorr::constants {

// SI 2019 exact values, CODATA 2018 for eps0.
inline constexpr double planck_h = 6.62607015e-34;        // J s
inline constexpr double hbar = planck_h / (2.0 * std::numbers::pi);
inline constexpr double boltzmann = 1.380649e-23;          // J/K
inline constexpr double speed_of_light = 299792458.0;      // m/s
inline constexpr double epsilon0 = 8.8541878128e-12;       // F/m
inline constexpr double pi = std::numbers::pi;
inline constexpr double ln2 = std::numbers::ln2;

}  // namespace eocorr::constants
