#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "paultrap/coulomb.hpp"
#include "paultrap/trap_model.hpp"
#include "paultrap/units.hpp"
#include "paultrap/vec3.hpp"

/// N-body ion dynamics in the linear Paul trap: time-dependent (or secular)
/// trap forces, softened Coulomb interaction, stochastic Doppler cooling,
/// parametric tickle excitation and destructive ejection counting.
namespace paultrap::dynamics {

enum class FieldMode { full_rf, secular };

struct IntegratorConfig {
  double dt = 0.0; // s
  FieldMode field_mode = FieldMode::full_rf;
  CoulombMode coulomb = CoulombMode::direct;
  double softening_length = 100e-9; // m
  bool deterministic_reduction = true;
  unsigned threads = 1; // 0 = hardware concurrency

  void validate(const trap::DriveSettings &drive) const;
};

/// Default step: T_rf/100 in full_rf mode, T_secular/200 (fastest radial
/// secular period among the stable species) in secular mode.
double default_timestep(FieldMode mode, const trap::TrapGeometry &geometry,
                        const trap::DriveSettings &drive,
                        std::span<const trap::IonSpecies> species);

struct CoolingBeam {
  double wavelength = 422e-9;           // m
  double gamma = units::two_pi * 20.2e6; // rad/s, natural linewidth
  double detuning = -0.5 * gamma;       // rad/s
  double saturation_s = 1.0;
  Vec3 direction{0.57735026918962573, 0.57735026918962573, 0.57735026918962573};
  bool on = true;

  double wavenumber() const;
  void validate() const;
};

struct CoolingResult {
  Vec3 mean_force;        // N
  double scattering_rate; // 1/s
};

/// Two-level Lorentzian scattering rate and mean radiation-pressure force.
CoolingResult cooling_force(const Vec3 &velocity, const CoolingBeam &beam);

struct TickleDrive {
  double frequency = 0.0;  // Hz
  double amplitude = 0.0;  // V
  double duration = 0.0;   // s
  double start_time = 0.0; // s, beginning of the drive window

  bool active(double time) const {
    return time >= start_time && time < start_time + duration;
  }
  void validate() const;
};

/// Parametric quadrupole tickle, Phi_t = A cos(2 pi f t)(x^2 - y^2)/(2 r0^2).
/// Zero outside the drive window.
Vec3 apply_tickle(const Vec3 &position, double time, const TickleDrive &tickle,
                  const trap::TrapGeometry &geometry, const trap::IonSpecies &species);

struct EjectionConfig {
  double detection_efficiency = 1.0;
  void validate() const;
};

/// Phase-space state of the ion cloud. Ions are stored as structure of arrays.
struct CloudState {
  std::vector<trap::IonSpecies> species;
  std::vector<double> x, y, z;
  std::vector<double> vx, vy, vz;
  std::vector<std::uint32_t> species_index;
  double time = 0.0;
  std::mt19937_64 rng;
  std::uint64_t lost = 0; // ions removed after leaving the trap region

  std::size_t size() const { return x.size(); }
  std::uint32_t add_species(const trap::IonSpecies &s);
  void add_ion(const Vec3 &position, const Vec3 &velocity, std::uint32_t species_id);
  Vec3 position(std::size_t i) const { return {x[i], y[i], z[i]}; }
  Vec3 velocity(std::size_t i) const { return {vx[i], vy[i], vz[i]}; }
  const trap::IonSpecies &species_of(std::size_t i) const { return species[species_index[i]]; }
  /// Number of ions of the given species.
  std::size_t count(std::uint32_t species_id) const;
  /// Drops ions outside |x|,|y| < r0, |z| < z0; returns how many were dropped.
  std::size_t remove_unbound(const trap::TrapGeometry &geometry);
  void validate() const;

  friend bool operator==(const CloudState &, const CloudState &) = default;
};

struct SimulationContext {
  trap::TrapGeometry geometry;
  trap::DriveSettings drive;
  IntegratorConfig integrator;
  CoolingBeam cooling;
  std::optional<TickleDrive> tickle;
};

struct EquilibrationReport {
  std::size_t bound_ions = 0;
  double secular_temperature = 0.0; // K
  std::uint64_t steps = 0;
};

struct EnergyBreakdown {
  double kinetic = 0.0;
  double trap = 0.0; // pseudopotential
  double coulomb = 0.0;
  double total() const { return kinetic + trap + coulomb; }
};

/// Owns the per-step scratch buffers; one integrator per simulation context.
class Integrator {
public:
  explicit Integrator(SimulationContext context);

  const SimulationContext &context() const { return context_; }
  void set_tickle(std::optional<TickleDrive> tickle);
  void set_cooling(bool on) { context_.cooling.on = on; }

  /// Advances by one dt with a drift-kick-drift (position Verlet) scheme;
  /// forces are evaluated at the half step. Stochastic recoil follows the
  /// deterministic update; escaped ions are removed. Throws BlowUp.
  void step(CloudState &state);

  /// Runs step() for round(duration / dt) steps.
  EquilibrationReport equilibrate(CloudState &state, double duration);

  /// Number of steps per RF period (rounded).
  std::uint64_t steps_per_rf_period() const;

  /// Accelerations from all forces at the current state and time, without
  /// advancing. Exposed for diagnostics and tests.
  std::vector<Vec3> accelerations(const CloudState &state, double time);

private:
  void compute_accelerations(const CloudState &state, double time);

  SimulationContext context_;
  std::vector<double> charge_, ex_, ey_, ez_;
  std::vector<double> ax_, ay_, az_, rate_;
};

/// Single step on a copy of the state.
CloudState step(CloudState state, const SimulationContext &context);

/// Coulomb accelerations of every ion.
std::vector<Vec3> coulomb_accelerations(const CloudState &state, const IntegratorConfig &config);

/// Removes every ion; bound ions are detected with the configured efficiency
/// (binomial draw from the state's generator). Returns the detected count.
std::uint64_t eject_and_count(CloudState &state, const EjectionConfig &config,
                              const trap::TrapGeometry &geometry);

/// Instantaneous kinetic temperature sum(m v^2) / (3 N k_B).
double kinetic_temperature(const CloudState &state);

/// Secular temperature: advances the state to successive RF phase-zero
/// instants (where the first-order micromotion velocity vanishes) and averages
/// the kinetic temperature over `samples` (>= 10) of them, spaced by
/// `stride_periods` RF periods.
double secular_temperature(Integrator &integrator, CloudState &state, int samples = 10,
                           int stride_periods = 1);

/// Kinetic + pseudopotential + softened Coulomb energy.
EnergyBreakdown total_energy(const CloudState &state, const SimulationContext &context);

/// Recipe for a fresh cloud: ions placed uniformly in the cold-fluid spheroid
/// of the first laser-cooled species, Maxwellian velocities.
struct CloudRecipe {
  struct Component {
    trap::IonSpecies species;
    std::size_t count = 0;
  };
  std::vector<Component> composition;
  double initial_temperature = 10e-3; // K
};

/// Aspect ratio (axial / radial semi-axis) of a uniform cold plasma spheroid
/// in a harmonic well with the given secular angular frequencies.
double cold_fluid_aspect_ratio(double omega_radial, double omega_axial);

/// Builds a cloud from the recipe. Species outside the stability region are
/// never trapped and are left out.
CloudState synthesize_cloud(const CloudRecipe &recipe, const trap::TrapGeometry &geometry,
                            const trap::DriveSettings &drive, std::uint64_t seed);

} // namespace paultrap::dynamics
