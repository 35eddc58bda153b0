#pragma once

#include <numbers>

/// Physical constants (CODATA 2018, SI units).
namespace nfrht::constants {

inline constexpr const char* kVersion = "CODATA-2018";

inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double k_B = 1.380649e-23;          // J / K
inline constexpr double c = 299792458.0;             // m / s
inline constexpr double sigma_SB = 5.670374419e-8;   // W m^-2 K^-4
inline constexpr double pi = std::numbers::pi;

}  // namespace nfrht::constants
