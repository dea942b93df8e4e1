#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "paultrap/ion_dynamics.hpp"
#include "paultrap/loading.hpp"
#include "paultrap/trap_model.hpp"

/// Scenario configuration: a sectioned key = value text file where every
/// physical quantity carries an explicit unit, e.g.
///
///   [trap]
///   r0 = 3.2 mm
///   [drive]
///   omega_rf = 2.5 MHz     # frequency units on an angular key imply 2 pi
///
/// Unknown sections or keys are errors. Everything is converted to SI on load.
namespace paultrap::harness {

struct LoadingSettings {
  double background_loss = 0.0;     // 1/s
  double target_saturation = 4e4;   // ions, peak of N_sat(v_rf)
  double capacity_scale = 0.0;      // 0 = calibrate against target_saturation
  double volume_resolution = 80e-6; // m
  double duration = 120.0;          // s
  std::size_t samples = 121;
  std::vector<double> curve_v_rf; // V, one loading curve per entry
};

struct RateScanSettings {
  std::vector<double> powers; // W
  std::size_t trials = 20;
  double window = 1.0; // s
  std::size_t window_points = 5;
  bool counting_noise = true;
};

struct SpectrumSettings {
  double start = 50e3; // Hz
  double stop = 1e6;   // Hz
  double step = 5e3;   // Hz
  double tickle_amplitude = 16.0;   // V
  double dwell = 0.5e-3;            // s
  double equilibration = 0.2e-3;    // s
  std::size_t ions = 200;
  double initial_temperature = 10e-3; // K
  std::size_t control_runs = 3;
  unsigned threads = 1;
  double detection_efficiency = 1.0;
  double fig4_v_rf = 500.0;  // V
  double fig6b_v_rf = 350.0; // V
  int max_subharmonic = 2;
  double min_contrast = 10.0;      // %
  double contrast_window = 60e3;   // Hz, full width searched for the dip minimum
};

struct SweepSettings {
  double v_rf_start = 50.0; // V
  double v_rf_stop = 500.0; // V
  double v_rf_step = 5.0;   // V

  std::vector<double> grid() const;
};

struct ScenarioConfig {
  trap::TrapGeometry geometry;
  double axial_frequency = 0.0; // Hz, target of the kappa calibration
  bool kappa_calibrated = false;
  trap::DriveSettings drive;
  trap::IonSpecies species;
  dynamics::IntegratorConfig integrator; // dt = 0 selects the default step
  dynamics::CoolingBeam cooling;
  loading::PhotoionBeam photoion;
  loading::OvenSource oven;
  loading::EBSource electron_beam;
  LoadingSettings loading;
  RateScanSettings rate_scan;
  SpectrumSettings spectrum;
  SweepSettings sweep;
  std::uint64_t master_seed = 1;
  std::filesystem::path output_directory = "out";
  std::filesystem::path source; // file the configuration was read from
};

/// Parses, converts to SI, applies defaults, calibrates kappa when requested
/// and validates. Throws ParseError (with line/column) or ValidationError
/// naming the offending key.
ScenarioConfig parse_config(std::string_view text, const std::filesystem::path &source = {});
ScenarioConfig load_config(const std::filesystem::path &path);

/// Deterministic `section.key = value unit` listing of every resolved
/// setting in SI. Feeding it back to parse_config reproduces the same
/// configuration.
std::string canonical_text(const ScenarioConfig &config);

/// SHA-256 of the canonical text without run.master_seed and
/// run.output_directory, as lowercase hex.
std::string config_digest(const ScenarioConfig &config);

} // namespace paultrap::harness
