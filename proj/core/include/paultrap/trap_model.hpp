#pragma once

#include <string>

#include "paultrap/vec3.hpp"

/// Analytic field and stability layer of the linear Paul trap.
///
/// Potential convention (V_rf zero-to-peak on the driven rod pair):
///
///   Phi(x,y,z,t) = eta_rf V_rf cos(Omega t) (x^2 - y^2) / (2 r0^2)
///                + kappa V_ec (z^2 - (x^2 + y^2)/2) / z0^2
///
/// All functions are pure and thread-safe.
namespace paultrap::trap {

struct TrapGeometry {
  double r0 = 3.2e-3;            // m, field radius
  double z0 = 10e-3;             // m, half end-cap separation
  double rod_diameter = 6.35e-3; // m, informational only
  double kappa_axial = 1.44e-3;  // axial geometric efficiency
  double eta_rf = 1.0;           // RF geometric efficiency

  void validate() const;
};

struct DriveSettings {
  double omega_rf = 0.0; // rad/s
  double v_rf = 0.0;     // V, zero-to-peak
  double v_ec = 0.0;     // V
  double v_dc = 0.0;     // V, DC quadrupole between the rod pairs; lifts the x/y degeneracy

  void validate() const;
};

struct IonSpecies {
  std::string name;
  double mass = 0.0;   // kg
  double charge = 0.0; // C
  // Only laser-cooled species scatter the cooling beam; the rest are
  // cooled sympathetically through the Coulomb interaction.
  bool laser_cooled = true;

  void validate() const;
  friend bool operator==(const IonSpecies &, const IonSpecies &) = default;
};

/// 88Sr+ (88 u, +e, laser cooled at 422 nm).
IonSpecies strontium88();

struct MathieuParams {
  double q_radial = 0.0;
  double a_radial = 0.0;
  double a_axial = 0.0;
  double a_split = 0.0; // from v_dc: a_x = a_radial + a_split, a_y = a_radial - a_split
};

struct SecularFrequencies {
  double nu_radial = 0.0; // Hz
  double nu_axial = 0.0;  // Hz
};

struct StabilityReport {
  bool stable = false;
  // Distance to the nearest bound: positive inside the region, negative
  // (distance past the most violated bound) outside.
  double margin = 0.0;
};

struct GridSpec {
  double resolution = 0.0; // m; must be <= r0 / 20
};

struct VolumeEstimate {
  double volume = 0.0;          // m^3
  double depth = 0.0;           // J
  double grid_resolution = 0.0; // m, actual spacing used
};

inline constexpr double first_region_q_limit = 0.908;

MathieuParams mathieu_params(const TrapGeometry &geometry, const DriveSettings &drive,
                             const IonSpecies &species);

StabilityReport stability_check(const MathieuParams &params);

/// Lowest-order adiabatic secular frequencies; nu_radial is the x/y mean
/// (a_split ignored). Throws UnstableParameters.
SecularFrequencies secular_frequencies(const MathieuParams &params, const DriveSettings &drive);

/// Characteristic exponent beta of the Mathieu equation
/// x'' + (a - 2q cos 2 tau) x = 0 in the first stability region, from the
/// standard continued-fraction relation. Throws UnstableParameters.
double mathieu_beta(double a, double q);

/// Radial secular frequency from the exact characteristic exponent
/// (beta Omega / 4 pi). Higher order than secular_frequencies().
double exact_radial_frequency(const MathieuParams &params, const DriveSettings &drive);

/// Force on an ion from the instantaneous RF + end-cap field.
/// Throws OutOfRegion outside |x|,|y| < r0, |z| < z0.
Vec3 instantaneous_force(const Vec3 &position, double time, const TrapGeometry &geometry,
                         const DriveSettings &drive, const IonSpecies &species);

/// Time-averaged (ponderomotive) potential energy. Throws OutOfRegion.
double pseudopotential_energy(const Vec3 &position, const TrapGeometry &geometry,
                              const DriveSettings &drive, const IonSpecies &species);

/// Negative gradient of pseudopotential_energy. Throws OutOfRegion.
Vec3 pseudopotential_force(const Vec3 &position, const TrapGeometry &geometry,
                           const DriveSettings &drive, const IonSpecies &species);

/// Curvatures of the pseudopotential,
/// U = k_r rho^2 / 2 + k_s (x^2 - y^2) / 2 + k_z z^2 / 2.
/// k_r may be negative (radial defocusing by the end caps).
struct PseudopotentialCurvature {
  double radial = 0.0; // J/m^2
  double axial = 0.0;  // J/m^2
  double split = 0.0;  // J/m^2, from v_dc
};
PseudopotentialCurvature pseudopotential_curvature(const TrapGeometry &geometry,
                                                   const DriveSettings &drive,
                                                   const IonSpecies &species);

/// Volume of the connected sub-level set of the pseudopotential that contains
/// the trap centre, below the lowest point on the boundary of the box
/// |x|,|y| <= r0, |z| <= z0. Evaluated on a uniform grid; deterministic.
/// Returns a zero estimate when the parameters are unstable.
VolumeEstimate trap_volume(const TrapGeometry &geometry, const DriveSettings &drive,
                           const IonSpecies &species, const GridSpec &grid);

/// kappa_axial that reproduces the measured axial frequency at the given drive.
double calibrate_kappa(double measured_nu_axial, const TrapGeometry &geometry,
                       const DriveSettings &drive, const IonSpecies &species);

bool inside_region(const Vec3 &position, const TrapGeometry &geometry);

} // namespace paultrap::trap
