#include <cmath>

#include "paultrap/errors.hpp"
#include "paultrap/ion_dynamics.hpp"
#include "paultrap/units.hpp"

namespace paultrap::dynamics {

double CoolingBeam::wavenumber() const { return units::two_pi / wavelength; }

void CoolingBeam::validate() const {
  if (!(wavelength > 0.0))
    throw ValidationError("cooling.wavelength must be > 0");
  if (!(gamma > 0.0))
    throw ValidationError("cooling.linewidth must be > 0");
  if (!(saturation_s >= 0.0))
    throw ValidationError("cooling.saturation must be >= 0");
  if (std::abs(norm(direction) - 1.0) > 1e-9)
    throw ValidationError("cooling.direction must be a unit vector");
}

CoolingResult cooling_force(const Vec3 &velocity, const CoolingBeam &beam) {
  if (!beam.on || beam.saturation_s == 0.0)
    return {{}, 0.0};
  const double k = beam.wavenumber();
  const double doppler = k * dot(beam.direction, velocity);
  const double x = 2.0 * (beam.detuning - doppler) / beam.gamma;
  const double rate = 0.5 * beam.gamma * beam.saturation_s / (1.0 + beam.saturation_s + x * x);
  return {beam.direction * (units::hbar * k * rate), rate};
}

} // namespace paultrap::dynamics
