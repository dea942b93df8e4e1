#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "paultrap/ion_dynamics.hpp"
#include "paultrap/trap_model.hpp"

/// Diagnostic protocols on top of the dynamics engine: tickle-sweep mass
/// spectra with destructive ejection counting, peak and contrast analysis,
/// mass identification and cloud spatial profiles.
namespace paultrap::spectrometry {

/// Everything a single destructive realization needs besides the tickle.
struct MeasurementSetup {
  trap::TrapGeometry geometry;
  trap::DriveSettings drive;
  dynamics::IntegratorConfig integrator; // dt = 0 selects default_timestep()
  dynamics::CoolingBeam cooling;
  dynamics::EjectionConfig ejection;
};

struct SpectrumScan {
  std::vector<double> frequency_grid; // Hz, strictly increasing
  double tickle_amplitude = 0.0;      // V
  double dwell = 0.0;                 // s per point
  dynamics::CloudRecipe cloud;
  double equilibration_time = 0.0; // s, cooling only, before the tickle
  std::size_t control_runs = 3;
  std::uint64_t master_seed = 0;
  unsigned threads = 1; // frequency points in flight; 0 = hardware concurrency

  void validate() const;
};

struct SpectrumPoint {
  double frequency = 0.0; // Hz
  double survival_fraction = 0.0;
  std::uint64_t counted = 0;
  std::uint64_t baseline = 0;
};

struct SpectrumResult {
  std::vector<SpectrumPoint> points;
  std::vector<std::uint64_t> control_counts; // one per control run
};

/// Linear grid start, start + step, ... up to stop (inclusive within 1e-9 step).
std::vector<double> frequency_grid(double start, double stop, double step);

/// One realization: synthesize, cool for the equilibration time, tickle for
/// the dwell (amplitude 0 gives a control run), eject and count.
std::uint64_t realize(const SpectrumScan &scan, const MeasurementSetup &setup,
                      double tickle_frequency, double tickle_amplitude, std::uint64_t seed);

/// Full spectrum with an independently synthesized cloud per point. The
/// baseline is the mean control count. Throws ControlRunFailure when a control
/// run keeps fewer than 90% of the synthesized ions.
SpectrumResult run_mass_spectrum(const SpectrumScan &scan, const MeasurementSetup &setup);

/// {2 nu_R / n : n = 1..max_subharmonic}, with nu_R from the exact Mathieu
/// characteristic exponent. Throws UnstableParameters.
std::vector<double> analytic_resonances(const trap::IonSpecies &species,
                                        const trap::DriveSettings &drive,
                                        const trap::TrapGeometry &geometry,
                                        int max_subharmonic);

/// 100 (1 - min survival in [c - w/2, c + w/2] / baseline), clamped to
/// [0, 100]. The local baseline is the mean of the upper third of survival
/// values within [c - 2w, c + 2w]. Throws ValidationError when the window
/// leaves the grid or holds fewer than 3 points.
double contrast(const SpectrumResult &result, double peak_center, double window);

/// Frequency of the lowest survival inside [lo, hi]; for a flat-bottomed dip
/// the midpoint of the first and last minimal points.
double depletion_minimum(const SpectrumResult &result, double lo, double hi);

/// Mass whose exact 2 nu_R / n equals the peak frequency. Throws
/// UnstableParameters when the implied q leaves the first stability region.
double mass_from_peak(double peak_frequency, const trap::DriveSettings &drive,
                      const trap::TrapGeometry &geometry, int subharmonic_n,
                      double charge = units::elementary_charge);

struct Peak {
  double center = 0.0;   // Hz, depletion-weighted centroid
  double contrast = 0.0; // %, 100 (1 - min survival)
  double width = 0.0;    // Hz, extent of the depleted run
};

struct PeakReport {
  std::vector<Peak> peaks;        // in frequency order
  std::vector<double> satellites; // Hz, offsets of neighbours of the deepest peak
};

/// Peaks are maximal runs of points with survival below 1 - min_contrast/100.
/// Satellites are the other peaks within satellite_window of the deepest one.
PeakReport find_peaks(const SpectrumResult &result, double min_contrast = 10.0,
                      double satellite_window = 150e3);

enum class Axis { x, y, z };

struct Profile {
  double lower = 0.0;     // m, left edge of bin 0
  double bin_width = 0.0; // m
  std::vector<std::uint64_t> counts;
  double fwhm = 0.0; // m
};

/// Position histogram along the axis spanning the occupied range, with the
/// FWHM from linear interpolation of the outermost half-maximum crossings.
/// Needs at least 10 ions.
Profile cloud_profile(const dynamics::CloudState &state, Axis axis, int bins);

/// Same, from raw coordinates.
Profile position_profile(std::span<const double> coordinates, int bins);

/// Columns frequency_hz,survival_fraction,counted,baseline with one header row.
void write_spectrum_csv(std::ostream &out, const SpectrumResult &result);

} // namespace paultrap::spectrometry
