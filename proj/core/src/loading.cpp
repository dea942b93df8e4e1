#include "paultrap/loading.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "paultrap/errors.hpp"
#include "paultrap/fit.hpp"
#include "paultrap/parallel.hpp"
#include "paultrap/units.hpp"

namespace paultrap::loading {

namespace {

constexpr double ln2 = std::numbers::ln2;

// Integral over all time of the normalized envelope and of its square, in
// units of the FWHM duration.
double envelope_integral(PulseShape shape) {
  switch (shape) {
  case PulseShape::gaussian:
    return std::sqrt(units::pi / (4.0 * ln2));
  case PulseShape::sech2:
    // f = sech^2(t/T), FWHM = 2 acosh(sqrt 2) T, integral 2T
    return 2.0 / (2.0 * std::acosh(std::sqrt(2.0)));
  }
  return 0.0;
}

double squared_envelope_integral(PulseShape shape) {
  switch (shape) {
  case PulseShape::gaussian:
    return std::sqrt(units::pi / (8.0 * ln2));
  case PulseShape::sech2:
    return (4.0 / 3.0) / (2.0 * std::acosh(std::sqrt(2.0)));
  }
  return 0.0;
}

void require_positive(double v, const char *what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ValidationError(std::string("PhotoionBeam: ") + what + " must be positive");
}

} // namespace

void PhotoionBeam::validate() const {
  require_positive(pulse_energy, "pulse_energy");
  require_positive(pulse_duration_fwhm, "pulse_duration_fwhm");
  require_positive(rep_rate, "rep_rate");
  require_positive(waist, "waist");
  require_positive(wavelength, "wavelength");
  require_positive(two_photon_linewidth_fwhm, "two_photon_linewidth_fwhm");
  require_positive(intermediate_cross_section, "intermediate_cross_section");
  if (!(rate_coefficient >= 0.0) || !std::isfinite(rate_coefficient))
    throw ValidationError("PhotoionBeam: rate_coefficient must be >= 0");
  if (pulse_duration_fwhm * rep_rate >= 1.0)
    throw ValidationError("PhotoionBeam: pulse_duration_fwhm * rep_rate must be < 1");
}

double shape_factor(PulseShape shape) { return 1.0 / envelope_integral(shape); }

double envelope_duty(const PhotoionBeam &beam) {
  return beam.rep_rate * beam.pulse_duration_fwhm * envelope_integral(beam.shape);
}

double squared_envelope_duty(const PhotoionBeam &beam) {
  return beam.rep_rate * beam.pulse_duration_fwhm * squared_envelope_integral(beam.shape);
}

double peak_intensity(const PhotoionBeam &beam) {
  beam.validate();
  const double peak_power = shape_factor(beam.shape) * beam.pulse_energy / beam.pulse_duration_fwhm;
  const double intensity = 2.0 * peak_power / (units::pi * beam.waist * beam.waist); // W/m^2
  return intensity * 1e-4;
}

double two_photon_rate(const PhotoionBeam &beam, double atom_density) {
  if (!(atom_density >= 0.0))
    throw ValidationError("two_photon_rate: atom density must be >= 0");
  const double i_peak = peak_intensity(beam);
  return beam.rate_coefficient * atom_density * i_peak * i_peak * squared_envelope_duty(beam);
}

double cw_two_photon_rate(const PhotoionBeam &beam, double atom_density) {
  if (!(atom_density >= 0.0))
    throw ValidationError("cw_two_photon_rate: atom density must be >= 0");
  const double i_avg = peak_intensity(beam) * envelope_duty(beam);
  return beam.rate_coefficient * atom_density * i_avg * i_avg;
}

PhotoionBeam at_average_power(const PhotoionBeam &beam, double average_power) {
  if (!(average_power > 0.0))
    throw ValidationError("at_average_power: power must be positive");
  PhotoionBeam out = beam;
  out.pulse_energy = average_power / beam.rep_rate;
  return out;
}

double calibrate_rate_coefficient(const PhotoionBeam &beam, double atom_density,
                                  double target_rate) {
  if (!(atom_density > 0.0) || !(target_rate >= 0.0))
    throw ValidationError("calibrate_rate_coefficient: need density > 0 and rate >= 0");
  PhotoionBeam unit = beam;
  unit.rate_coefficient = 1.0;
  return target_rate / two_photon_rate(unit, atom_density);
}

double VaporPressureCurve::pressure(double temperature) const {
  if (!(temperature > 0.0))
    throw ValidationError("VaporPressureCurve: temperature must be positive");
  return std::pow(10.0, a - b / temperature) * units::mbar;
}

void VaporPressureCurve::validate() const {
  if (!std::isfinite(a) || !(b > 0.0))
    throw ValidationError("VaporPressureCurve: need finite a and b > 0 (increasing curve)");
}

void OvenSource::validate() const {
  if (!(calibration_current_high > calibration_current_low))
    throw ValidationError("OvenSource: calibration currents must be increasing");
  if (!(calibration_temp_high > calibration_temp_low) || !(calibration_temp_low > 0.0))
    throw ValidationError("OvenSource: calibration temperatures must be positive and increasing");
  if (!(max_current > min_current))
    throw ValidationError("OvenSource: calibrated current range is empty");
  vapor.validate();
  if (!(current >= min_current && current <= max_current))
    throw ValidationError("OvenSource: current " + std::to_string(current) +
                          " A outside the calibrated range [" + std::to_string(min_current) +
                          ", " + std::to_string(max_current) + "] A");
}

double oven_temperature(const OvenSource &source) {
  source.validate();
  const double slope = (source.calibration_temp_high - source.calibration_temp_low) /
                       (source.calibration_current_high - source.calibration_current_low);
  return source.calibration_temp_low + slope * (source.current - source.calibration_current_low);
}

double oven_pressure(const OvenSource &source) {
  return source.vapor.pressure(oven_temperature(source));
}

double oven_density(const OvenSource &source) {
  const double t = oven_temperature(source);
  return source.vapor.pressure(t) / (units::boltzmann * t);
}

std::vector<WeightedSpecies> default_impurities() {
  std::vector<WeightedSpecies> out;
  for (const double mass_u : {18.0, 28.0, 44.0, 104.0}) {
    trap::IonSpecies s;
    s.name = "X" + std::to_string(static_cast<int>(mass_u));
    s.mass = mass_u * units::atomic_mass_unit;
    s.charge = units::elementary_charge;
    s.laser_cooled = false;
    out.push_back({s, 0.25});
  }
  return out;
}

void EBSource::validate() const {
  if (!(electron_energy > 0.0))
    throw ValidationError("EBSource: electron_energy must be positive");
  if (!(effective_rate >= 0.0))
    throw ValidationError("EBSource: effective_rate must be >= 0");
  if (!(impurity_fraction >= 0.0 && impurity_fraction <= 1.0))
    throw ValidationError("EBSource: impurity_fraction must lie in [0, 1]");
  if (impurity_fraction > 0.0 && impurity_species.empty())
    throw ValidationError("EBSource: impurity_fraction > 0 needs impurity species");
  double total = 0.0;
  for (const auto &w : impurity_species) {
    w.species.validate();
    if (!(w.weight >= 0.0))
      throw ValidationError("EBSource: impurity weights must be >= 0");
    total += w.weight;
  }
  if (!impurity_species.empty() && std::abs(total - 1.0) > 1e-9)
    throw ValidationError("EBSource: impurity weights must sum to 1");
}

std::vector<WeightedSpecies> eb_composition(const EBSource &source,
                                            const trap::IonSpecies &primary) {
  source.validate();
  primary.validate();
  std::vector<WeightedSpecies> out;
  if (source.impurity_fraction < 1.0)
    out.push_back({primary, 1.0 - source.impurity_fraction});
  for (const auto &w : source.impurity_species)
    if (source.impurity_fraction * w.weight > 0.0)
      out.push_back({w.species, source.impurity_fraction * w.weight});
  return out;
}

void LoadingModel::validate() const {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw ValidationError("LoadingModel: rate must be finite and >= 0");
  if (!(capacity >= 0.0))
    throw ValidationError("LoadingModel: capacity must be >= 0");
  if (!(background_loss >= 0.0) || !std::isfinite(background_loss))
    throw ValidationError("LoadingModel: background_loss must be finite and >= 0");
  if (capacity == 0.0 && rate > 0.0)
    throw ValidationError("LoadingModel: zero capacity with nonzero rate");
}

double LoadingModel::relaxation_rate() const {
  return (rate > 0.0 ? rate / capacity : 0.0) + background_loss;
}

double LoadingModel::saturation() const {
  validate();
  const double k = relaxation_rate();
  if (k == 0.0)
    return rate > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return rate / k;
}

std::vector<double> loading_curve(const LoadingModel &model, std::span<const double> times) {
  model.validate();
  const double k = model.relaxation_rate();
  std::vector<double> out;
  out.reserve(times.size());
  for (const double t : times) {
    if (!(t >= 0.0))
      throw ValidationError("loading_curve: times must be >= 0");
    out.push_back(k == 0.0 ? model.rate * t : -(model.rate / k) * std::expm1(-k * t));
  }
  return out;
}

double time_to_fraction(const LoadingModel &model, double fraction) {
  model.validate();
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ValidationError("time_to_fraction: fraction must lie in (0, 1)");
  const double k = model.relaxation_rate();
  if (k == 0.0)
    throw ValidationError("time_to_fraction: model never saturates");
  return -std::log1p(-fraction) / k;
}

double cold_fluid_density(const trap::SecularFrequencies &secular,
                          const trap::IonSpecies &species) {
  species.validate();
  const double w_r = units::two_pi * secular.nu_radial;
  const double w_a = units::two_pi * secular.nu_axial;
  return units::epsilon0 * species.mass * (2.0 * w_r * w_r + w_a * w_a) /
         (species.charge * species.charge);
}

double capacity(const trap::DriveSettings &drive, const trap::TrapGeometry &geometry,
                const trap::IonSpecies &species, const trap::VolumeEstimate &volume,
                double scale) {
  if (!(scale >= 0.0))
    throw ValidationError("capacity: scale must be >= 0");
  if (!(volume.volume >= 0.0))
    throw ValidationError("capacity: volume must be >= 0");
  const auto params = trap::mathieu_params(geometry, drive, species);
  const auto secular = trap::secular_frequencies(params, drive);
  return scale * cold_fluid_density(secular, species) * volume.volume;
}

double calibrate_capacity_scale(std::span<const double> unscaled_capacities, double rate,
                                double background_loss, double target_saturation) {
  if (unscaled_capacities.empty())
    throw ValidationError("calibrate_capacity_scale: no capacities");
  const double peak = *std::max_element(unscaled_capacities.begin(), unscaled_capacities.end());
  if (!(peak > 0.0))
    throw ValidationError("calibrate_capacity_scale: all capacities are zero");
  if (!(target_saturation > 0.0) || !(rate > 0.0) || !(background_loss >= 0.0))
    throw ValidationError("calibrate_capacity_scale: need target > 0, rate > 0, loss >= 0");
  // N_sat = R C / (R + g C) = T  =>  C = T R / (R - g T)
  const double denom = rate - background_loss * target_saturation;
  if (!(denom > 0.0))
    throw ValidationError("calibrate_capacity_scale: rate too low to reach the target "
                          "saturation against the background loss");
  return target_saturation * rate / denom / peak;
}

void RateScanOptions::validate() const {
  if (trials < 1)
    throw ValidationError("rate_scan: trials must be >= 1");
  if (!(load_window > 0.0))
    throw ValidationError("rate_scan: load_window must be positive");
  if (window_points < 2)
    throw ValidationError("rate_scan: need at least 2 sampling instants per window");
  if (!(capacity >= 0.0) || !(background_loss >= 0.0))
    throw ValidationError("rate_scan: capacity and background_loss must be >= 0");
}

RateScanResult rate_scan(const PhotoionBeam &beam, double atom_density,
                         std::span<const double> powers, const RateScanOptions &options) {
  options.validate();
  beam.validate();
  if (powers.size() < 4)
    throw ValidationError("rate_scan: need at least 4 power points, got " +
                          std::to_string(powers.size()));
  for (const double p : powers)
    if (!(p > 0.0))
      throw ValidationError("rate_scan: powers must be positive");

  std::vector<double> instants(options.window_points);
  for (std::size_t j = 0; j < instants.size(); ++j)
    instants[j] = options.load_window * static_cast<double>(j + 1) /
                  static_cast<double>(options.window_points);

  RateScanResult result;
  result.points.resize(powers.size());
  parallel_for(powers.size(), resolve_threads(options.threads), [&](std::size_t p) {
    LoadingModel model;
    model.rate = two_photon_rate(at_average_power(beam, powers[p]), atom_density);
    model.capacity = options.capacity > 0.0 ? options.capacity
                                            : std::numeric_limits<double>::infinity();
    model.background_loss = options.background_loss;
    const auto mean = loading_curve(model, instants);

    std::vector<double> t, n;
    t.reserve(options.trials * instants.size());
    n.reserve(options.trials * instants.size());
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
      std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                        static_cast<std::uint32_t>(options.seed >> 32),
                        static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(trial)};
      std::mt19937_64 rng(seq);
      for (std::size_t j = 0; j < instants.size(); ++j) {
        double count = mean[j];
        if (options.counting_noise)
          count = mean[j] > 0.0
                      ? static_cast<double>(std::poisson_distribution<long long>(mean[j])(rng))
                      : 0.0;
        t.push_back(instants[j]);
        n.push_back(count);
      }
    }
    if (std::all_of(n.begin(), n.end(), [](double v) { return v == 0.0; }))
      throw DegenerateFit("rate_scan: no ions counted at average power " +
                          std::to_string(powers[p]) + " W");
    const auto fit = fit_line(t, n);
    result.points[p] = {powers[p], fit.slope, fit.slope_error};
  });

  std::vector<double> lx, ly;
  for (const auto &pt : result.points) {
    if (!(pt.rate > 0.0))
      throw DegenerateFit("rate_scan: non-positive fitted rate at " +
                          std::to_string(pt.average_power) + " W");
    lx.push_back(std::log(pt.average_power));
    ly.push_back(std::log(pt.rate));
  }
  const auto fit = fit_line(lx, ly);
  result.exponent = fit.slope;
  result.exponent_error = fit.slope_error;
  result.log_prefactor = fit.intercept;
  return result;
}

} // namespace paultrap::loading
