#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "paultrap/trap_model.hpp"

/// Ion production and trap filling: femtosecond two-photon photoionization,
/// oven vapour density, electron-bombardment composition and the rate /
/// capacity loading model.
namespace paultrap::loading {

enum class PulseShape { gaussian, sech2 };

struct PhotoionBeam {
  double pulse_energy = 0.15e-9;       // J
  double pulse_duration_fwhm = 50e-15; // s
  double rep_rate = 1e8;               // 1/s
  double waist = 20e-6;                // m, 1/e^2 intensity radius
  double wavelength = 431e-9;          // m
  double two_photon_linewidth_fwhm = 0.7e-9; // m, documentation only
  double intermediate_cross_section = 5600e-22; // m^2 (5600 Mb), documentation only
  // ions/s per (W/cm^2)^2 per (atoms/m^3); absorbs the interaction volume.
  double rate_coefficient = 0.0;
  PulseShape shape = PulseShape::gaussian;

  double average_power() const { return pulse_energy * rep_rate; }
  void validate() const;
};

/// Peak power times FWHM duration over pulse energy.
double shape_factor(PulseShape shape);

/// Time average over one repetition period of the normalized envelope f and of f^2
/// (f = 1 at the pulse peak).
double envelope_duty(const PhotoionBeam &beam);
double squared_envelope_duty(const PhotoionBeam &beam);

/// On-axis peak intensity in W/cm^2.
double peak_intensity(const PhotoionBeam &beam);

/// Ionization rate (ions/s) for the given neutral density (atoms/m^3).
double two_photon_rate(const PhotoionBeam &beam, double atom_density);

/// Rate for continuous light of the same average power and beam size.
double cw_two_photon_rate(const PhotoionBeam &beam, double atom_density);

/// Copy of the beam with the pulse energy rescaled to the given average power.
PhotoionBeam at_average_power(const PhotoionBeam &beam, double average_power);

/// rate_coefficient that yields `target_rate` for this beam and density.
double calibrate_rate_coefficient(const PhotoionBeam &beam, double atom_density,
                                  double target_rate);

/// Antoine form log10(P / mbar) = a - b / T[K].
struct VaporPressureCurve {
  double a = 2.772;
  double b = 5659.7; // K

  double pressure(double temperature) const; // Pa
  void validate() const;
};

struct OvenSource {
  double current = 1.0; // A
  // Two-point linear current -> temperature map.
  double calibration_current_low = 0.8;  // A
  double calibration_temp_low = 383.15;  // K
  double calibration_current_high = 1.2; // A
  double calibration_temp_high = 443.15; // K
  double min_current = 0.5;              // A, calibrated range
  double max_current = 1.3;              // A
  VaporPressureCurve vapor;

  void validate() const;
};

double oven_temperature(const OvenSource &source); // K
double oven_pressure(const OvenSource &source);    // Pa

/// Neutral Sr density n = P / (k_B T). Throws ValidationError outside the
/// calibrated current range.
double oven_density(const OvenSource &source);

struct WeightedSpecies {
  trap::IonSpecies species;
  double weight = 0.0;
};

/// Generic light-to-heavy contaminants (18, 28, 44, 104 u), equal weights.
std::vector<WeightedSpecies> default_impurities();

struct EBSource {
  double electron_energy = 300.0; // eV
  double effective_rate = 0.0;    // ions/s
  double impurity_fraction = 0.34;
  std::vector<WeightedSpecies> impurity_species = default_impurities();

  void validate() const;
};

/// (primary, 1 - f) followed by each impurity with weight f * w_i.
/// Zero-weight entries are omitted.
std::vector<WeightedSpecies> eb_composition(const EBSource &source,
                                            const trap::IonSpecies &primary);

/// dN/dt = R (1 - N / N_cap) - gamma N, N(0) = 0.
struct LoadingModel {
  double rate = 0.0;            // ions/s
  double capacity = 0.0;        // ions
  double background_loss = 0.0; // 1/s

  double saturation() const;
  /// Relaxation rate R / N_cap + gamma.
  double relaxation_rate() const;
  void validate() const;
};

std::vector<double> loading_curve(const LoadingModel &model, std::span<const double> times);

/// Time at which N reaches `fraction` of N_sat (fraction in (0, 1)).
double time_to_fraction(const LoadingModel &model, double fraction);

/// Cold-fluid space-charge density eps0 m (2 w_R^2 + w_A^2) / Q^2, in 1/m^3.
double cold_fluid_density(const trap::SecularFrequencies &secular,
                          const trap::IonSpecies &species);

/// scale * n0 * volume. Throws UnstableParameters.
double capacity(const trap::DriveSettings &drive, const trap::TrapGeometry &geometry,
                const trap::IonSpecies &species, const trap::VolumeEstimate &volume,
                double scale = 1.0);

/// Capacity scale that makes the largest saturation level among the given
/// unscaled capacities equal `target_saturation`, for fixed rate and loss.
double calibrate_capacity_scale(std::span<const double> unscaled_capacities, double rate,
                                double background_loss, double target_saturation);

struct RateScanOptions {
  std::size_t trials = 20;
  double load_window = 1.0;      // s
  std::size_t window_points = 5; // sampling instants in (0, load_window]
  bool counting_noise = true;
  double capacity = 0.0; // 0 = unbounded (pure linear loading)
  double background_loss = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct RatePoint {
  double average_power = 0.0; // W
  double rate = 0.0;          // ions/s, fitted initial slope
  double error = 0.0;         // ions/s, 1-sigma from the fit
};

struct RateScanResult {
  std::vector<RatePoint> points;
  double exponent = 0.0;
  double exponent_error = 0.0;
  double log_prefactor = 0.0; // ln(rate / (ions/s)) at 1 W
};

/// Simulated Fig.-5-style scan: per power, repeated seeded loading windows with
/// Poisson counts, initial slope by linear fit, then log-log fit of rate vs
/// power. Needs at least 4 powers; throws DegenerateFit when a point records no
/// ions at all.
RateScanResult rate_scan(const PhotoionBeam &beam, double atom_density,
                         std::span<const double> powers, const RateScanOptions &options);

} // namespace paultrap::loading
