#pragma once

#include <numbers>

// SI constants (CODATA 2018). Everything inside the library is SI; unit
// conversion happens only at configuration ingestion.
namespace paultrap::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double epsilon0 = 8.8541878128e-12;          // F/m
inline constexpr double coulomb_constant = 1.0 / (4.0 * pi * epsilon0);
inline constexpr double hbar = 1.054571817e-34;   // J s
inline constexpr double boltzmann = 1.380649e-23; // J/K
inline constexpr double celsius_offset = 273.15;

inline constexpr double mm = 1e-3;
inline constexpr double um = 1e-6;
inline constexpr double nm = 1e-9;
inline constexpr double kHz = 1e3;
inline constexpr double MHz = 1e6;
inline constexpr double mbar = 100.0; // Pa

} // namespace paultrap::units
