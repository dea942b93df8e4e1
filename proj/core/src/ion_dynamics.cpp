#include "paultrap/ion_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "paultrap/errors.hpp"
#include "paultrap/units.hpp"

namespace paultrap::dynamics {

namespace {

constexpr double speed_limit = 1e6; // m/s, blow-up sentinel

Vec3 random_unit_vector(std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  const double cos_theta = uniform(rng);
  const double phi = units::pi * uniform(rng);
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
}

} // namespace

// --- configuration -----------------------------------------------------------

void IntegratorConfig::validate(const trap::DriveSettings &drive) const {
  if (!(dt > 0.0))
    throw ValidationError("integrator.dt must be > 0");
  if (field_mode == FieldMode::full_rf) {
    const double t_rf = units::two_pi / drive.omega_rf;
    if (dt > t_rf / 50.0 * (1.0 + 1e-12))
      throw ValidationError("integrator.dt must be <= T_rf/50 in full_rf mode");
  }
  if (!(softening_length >= 0.0))
    throw ValidationError("integrator.softening_length must be >= 0");
}

double default_timestep(FieldMode mode, const trap::TrapGeometry &geometry,
                        const trap::DriveSettings &drive,
                        std::span<const trap::IonSpecies> species) {
  const double t_rf = units::two_pi / drive.omega_rf;
  if (mode == FieldMode::full_rf)
    return t_rf / 100.0;
  double fastest = 0.0;
  for (const auto &s : species) {
    const auto p = trap::mathieu_params(geometry, drive, s);
    if (!trap::stability_check(p).stable)
      continue;
    const auto nu = trap::secular_frequencies(p, drive);
    fastest = std::max({fastest, nu.nu_radial, nu.nu_axial});
  }
  if (fastest == 0.0)
    throw UnstableParameters("default_timestep: no species has stable secular motion");
  return 1.0 / fastest / 200.0;
}

void TickleDrive::validate() const {
  if (!(frequency > 0.0))
    throw ValidationError("tickle.frequency must be > 0");
  if (!(amplitude >= 0.0))
    throw ValidationError("tickle.amplitude must be >= 0");
  if (!(duration >= 0.0))
    throw ValidationError("tickle.duration must be >= 0");
}

void EjectionConfig::validate() const {
  if (!(detection_efficiency >= 0.0 && detection_efficiency <= 1.0))
    throw ValidationError("ejection.detection_efficiency must be in [0, 1]");
}

Vec3 apply_tickle(const Vec3 &position, double time, const TickleDrive &tickle,
                  const trap::TrapGeometry &geometry, const trap::IonSpecies &species) {
  if (!tickle.active(time) || tickle.amplitude == 0.0)
    return {};
  const double c = species.charge * tickle.amplitude *
                   std::cos(units::two_pi * tickle.frequency * time) /
                   (geometry.r0 * geometry.r0);
  return {-c * position.x, c * position.y, 0.0};
}

// --- cloud state -------------------------------------------------------------

std::uint32_t CloudState::add_species(const trap::IonSpecies &s) {
  s.validate();
  for (std::size_t i = 0; i < species.size(); ++i)
    if (species[i] == s)
      return static_cast<std::uint32_t>(i);
  species.push_back(s);
  return static_cast<std::uint32_t>(species.size() - 1);
}

void CloudState::add_ion(const Vec3 &p, const Vec3 &v, std::uint32_t species_id) {
  if (species_id >= species.size())
    throw ValidationError("add_ion: unknown species index");
  x.push_back(p.x);
  y.push_back(p.y);
  z.push_back(p.z);
  vx.push_back(v.x);
  vy.push_back(v.y);
  vz.push_back(v.z);
  species_index.push_back(species_id);
}

std::size_t CloudState::count(std::uint32_t species_id) const {
  return static_cast<std::size_t>(
      std::count(species_index.begin(), species_index.end(), species_id));
}

std::size_t CloudState::remove_unbound(const trap::TrapGeometry &geometry) {
  const std::size_t n = size();
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!trap::inside_region(position(i), geometry))
      continue;
    if (kept != i) {
      x[kept] = x[i];
      y[kept] = y[i];
      z[kept] = z[i];
      vx[kept] = vx[i];
      vy[kept] = vy[i];
      vz[kept] = vz[i];
      species_index[kept] = species_index[i];
    }
    ++kept;
  }
  for (auto *v : {&x, &y, &z, &vx, &vy, &vz})
    v->resize(kept);
  species_index.resize(kept);
  lost += n - kept;
  return n - kept;
}

void CloudState::validate() const {
  const std::size_t n = size();
  if (y.size() != n || z.size() != n || vx.size() != n || vy.size() != n || vz.size() != n ||
      species_index.size() != n)
    throw ValidationError("CloudState: per-ion arrays differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]) || !std::isfinite(z[i]))
      throw ValidationError("CloudState: non-finite position for ion " + std::to_string(i));
    if (species_index[i] >= species.size())
      throw ValidationError("CloudState: invalid species index for ion " + std::to_string(i));
  }
}

// --- integrator --------------------------------------------------------------

Integrator::Integrator(SimulationContext context) : context_(std::move(context)) {
  context_.geometry.validate();
  context_.drive.validate();
  context_.integrator.validate(context_.drive);
  context_.cooling.validate();
  if (context_.tickle)
    context_.tickle->validate();
}

void Integrator::set_tickle(std::optional<TickleDrive> tickle) {
  if (tickle)
    tickle->validate();
  context_.tickle = tickle;
}

std::uint64_t Integrator::steps_per_rf_period() const {
  return static_cast<std::uint64_t>(
      std::llround(units::two_pi / context_.drive.omega_rf / context_.integrator.dt));
}

void Integrator::compute_accelerations(const CloudState &state, double time) {
  const std::size_t n = state.size();
  for (auto *v : {&charge_, &ex_, &ey_, &ez_, &ax_, &ay_, &az_, &rate_})
    v->resize(n);

  const auto &g = context_.geometry;
  const auto &cfg = context_.integrator;
  for (std::size_t i = 0; i < n; ++i)
    charge_[i] = state.species_of(i).charge;
  coulomb_field(ParticleView{state.x, state.y, state.z, charge_},
                FieldOptions{cfg.coulomb, cfg.softening_length, cfg.deterministic_reduction,
                             cfg.threads},
                ex_, ey_, ez_);

  // Per-species trap coefficients: F = -(cx x, cy y, cz z).
  struct Coefficients {
    double cx, cy, cz, inv_mass;
  };
  std::vector<Coefficients> coef(state.species.size());
  const double rf = g.eta_rf * context_.drive.v_rf * std::cos(context_.drive.omega_rf * time) /
                    (g.r0 * g.r0);
  const double dc = g.kappa_axial * context_.drive.v_ec / (g.z0 * g.z0);
  const double split = g.eta_rf * context_.drive.v_dc / (g.r0 * g.r0);
  for (std::size_t s = 0; s < state.species.size(); ++s) {
    const auto &sp = state.species[s];
    if (cfg.field_mode == FieldMode::full_rf) {
      coef[s] = {sp.charge * (rf - dc + split), sp.charge * (-rf - dc - split),
                 sp.charge * 2.0 * dc, 1.0 / sp.mass};
    } else {
      const auto k = trap::pseudopotential_curvature(g, context_.drive, sp);
      coef[s] = {k.radial + k.split, k.radial - k.split, k.axial, 1.0 / sp.mass};
    }
  }

  const auto &tickle = context_.tickle;
  const bool tickling = tickle && tickle->active(time) && tickle->amplitude != 0.0;
  const double tickle_phase =
      tickling ? tickle->amplitude * std::cos(units::two_pi * tickle->frequency * time) /
                     (g.r0 * g.r0)
               : 0.0;
  const auto &beam = context_.cooling;

  for (std::size_t i = 0; i < n; ++i) {
    const auto sid = state.species_index[i];
    const auto &c = coef[sid];
    const double Q = charge_[i];
    double fx = -c.cx * state.x[i] + Q * ex_[i];
    double fy = -c.cy * state.y[i] + Q * ey_[i];
    double fz = -c.cz * state.z[i] + Q * ez_[i];
    if (tickling) {
      fx -= Q * tickle_phase * state.x[i];
      fy += Q * tickle_phase * state.y[i];
    }
    rate_[i] = 0.0;
    if (beam.on && state.species[sid].laser_cooled) {
      const auto cool = cooling_force(state.velocity(i), beam);
      fx += cool.mean_force.x;
      fy += cool.mean_force.y;
      fz += cool.mean_force.z;
      rate_[i] = cool.scattering_rate;
    }
    ax_[i] = fx * c.inv_mass;
    ay_[i] = fy * c.inv_mass;
    az_[i] = fz * c.inv_mass;
  }
}

std::vector<Vec3> Integrator::accelerations(const CloudState &state, double time) {
  compute_accelerations(state, time);
  std::vector<Vec3> out(state.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {ax_[i], ay_[i], az_[i]};
  return out;
}

void Integrator::step(CloudState &state) {
  const double dt = context_.integrator.dt;
  const double half = 0.5 * dt;
  const std::size_t n = state.size();

  for (std::size_t i = 0; i < n; ++i) {
    state.x[i] += half * state.vx[i];
    state.y[i] += half * state.vy[i];
    state.z[i] += half * state.vz[i];
  }
  compute_accelerations(state, state.time + half);
  for (std::size_t i = 0; i < n; ++i) {
    state.vx[i] += dt * ax_[i];
    state.vy[i] += dt * ay_[i];
    state.vz[i] += dt * az_[i];
    state.x[i] += half * state.vx[i];
    state.y[i] += half * state.vy[i];
    state.z[i] += half * state.vz[i];
  }
  state.time += dt;

  // Photon recoil: absorption shot noise along the beam around the mean
  // force already applied, plus isotropic spontaneous emission.
  const auto &beam = context_.cooling;
  if (beam.on) {
    const double hbar_k = units::hbar * beam.wavenumber();
    for (std::size_t i = 0; i < n; ++i) {
      if (rate_[i] <= 0.0)
        continue;
      const double mean = rate_[i] * dt;
      const int events = std::poisson_distribution<int>(mean)(state.rng);
      const double kick = hbar_k / state.species_of(i).mass;
      Vec3 dv = beam.direction * ((events - mean) * kick);
      for (int e = 0; e < events; ++e)
        dv += random_unit_vector(state.rng) * kick;
      state.vx[i] += dv.x;
      state.vy[i] += dv.y;
      state.vz[i] += dv.z;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double v2 = state.vx[i] * state.vx[i] + state.vy[i] * state.vy[i] +
                      state.vz[i] * state.vz[i];
    if (!(v2 < speed_limit * speed_limit))
      throw BlowUp("integrator blow-up: ion " + std::to_string(i) + " exceeded 1e6 m/s at t = " +
                   std::to_string(state.time) + " s");
  }
  state.remove_unbound(context_.geometry);
}

EquilibrationReport Integrator::equilibrate(CloudState &state, double duration) {
  if (!(duration >= 0.0))
    throw ValidationError("equilibrate: duration must be >= 0");
  const auto steps = static_cast<std::uint64_t>(std::llround(duration / context_.integrator.dt));
  for (std::uint64_t s = 0; s < steps; ++s)
    step(state);
  return {state.size(), kinetic_temperature(state), steps};
}

CloudState step(CloudState state, const SimulationContext &context) {
  Integrator integrator(context);
  integrator.step(state);
  return state;
}

std::vector<Vec3> coulomb_accelerations(const CloudState &state, const IntegratorConfig &config) {
  const std::size_t n = state.size();
  std::vector<double> q(n), ex(n), ey(n), ez(n);
  for (std::size_t i = 0; i < n; ++i)
    q[i] = state.species_of(i).charge;
  coulomb_field(ParticleView{state.x, state.y, state.z, q},
                FieldOptions{config.coulomb, config.softening_length,
                             config.deterministic_reduction, config.threads},
                ex, ey, ez);
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = q[i] / state.species_of(i).mass;
    out[i] = {s * ex[i], s * ey[i], s * ez[i]};
  }
  return out;
}

// --- diagnostics -------------------------------------------------------------

std::uint64_t eject_and_count(CloudState &state, const EjectionConfig &config,
                              const trap::TrapGeometry &geometry) {
  config.validate();
  std::uint64_t bound = 0;
  for (std::size_t i = 0; i < state.size(); ++i)
    if (trap::inside_region(state.position(i), geometry))
      ++bound;
  const auto detected =
      std::binomial_distribution<std::uint64_t>(bound, config.detection_efficiency)(state.rng);
  for (auto *v : {&state.x, &state.y, &state.z, &state.vx, &state.vy, &state.vz})
    v->clear();
  state.species_index.clear();
  return detected;
}

double kinetic_temperature(const CloudState &state) {
  const std::size_t n = state.size();
  if (n == 0)
    return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = state.velocity(i);
    sum += state.species_of(i).mass * dot(v, v);
  }
  return sum / (3.0 * static_cast<double>(n) * units::boltzmann);
}

double secular_temperature(Integrator &integrator, CloudState &state, int samples,
                           int stride_periods) {
  if (state.size() == 0)
    throw ValidationError("secular_temperature: the cloud is empty");
  if (samples < 10)
    throw ValidationError("secular_temperature: at least 10 sampling phases are required");
  if (stride_periods < 1)
    throw ValidationError("secular_temperature: stride must be >= 1 period");

  const double dt = integrator.context().integrator.dt;
  const double t_rf = units::two_pi / integrator.context().drive.omega_rf;
  const double periods = state.time / t_rf;
  const double next = std::ceil(periods - 1e-6);
  const auto align = std::llround((next * t_rf - state.time) / dt);
  for (long long s = 0; s < align; ++s)
    integrator.step(state);

  const std::uint64_t stride = integrator.steps_per_rf_period() * stride_periods;
  double sum = 0.0;
  for (int k = 0; k < samples; ++k) {
    if (k > 0)
      for (std::uint64_t s = 0; s < stride; ++s)
        integrator.step(state);
    if (state.size() == 0)
      throw SimulationError("secular_temperature: all ions were lost while sampling");
    sum += kinetic_temperature(state);
  }
  return sum / samples;
}

EnergyBreakdown total_energy(const CloudState &state, const SimulationContext &context) {
  EnergyBreakdown e;
  std::vector<double> q(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto &s = state.species_of(i);
    const Vec3 v = state.velocity(i);
    e.kinetic += 0.5 * s.mass * dot(v, v);
    const auto k = trap::pseudopotential_curvature(context.geometry, context.drive, s);
    const double x2 = state.x[i] * state.x[i], y2 = state.y[i] * state.y[i];
    e.trap += 0.5 * k.radial * (x2 + y2) + 0.5 * k.split * (x2 - y2) +
              0.5 * k.axial * state.z[i] * state.z[i];
    q[i] = s.charge;
  }
  if (context.integrator.coulomb != CoulombMode::off)
    e.coulomb = coulomb_energy(ParticleView{state.x, state.y, state.z, q},
                               context.integrator.softening_length);
  return e;
}

// --- cloud synthesis ---------------------------------------------------------

double cold_fluid_aspect_ratio(double omega_radial, double omega_axial) {
  if (!(omega_radial > 0.0) || !(omega_axial > 0.0))
    throw ValidationError("cold_fluid_aspect_ratio: frequencies must be > 0");
  // omega_z^2 / omega_p^2 with omega_p^2 = 2 omega_r^2 + omega_z^2; the shape
  // function below is monotone decreasing in the aspect ratio.
  const double target =
      omega_axial * omega_axial / (2.0 * omega_radial * omega_radial + omega_axial * omega_axial);
  auto shape = [](double alpha) {
    if (std::abs(alpha - 1.0) < 1e-6)
      return 1.0 / 3.0;
    if (alpha > 1.0) {
      const double s = alpha * alpha - 1.0;
      const double x = alpha / std::sqrt(s);
      return (0.5 * x * std::log((x + 1.0) / (x - 1.0)) - 1.0) / s;
    }
    const double s = 1.0 - alpha * alpha;
    return (1.0 - alpha / std::sqrt(s) * std::acos(alpha)) / s;
  };
  double lo = std::log(1e-4), hi = std::log(1e4);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (shape(std::exp(mid)) > target)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

CloudState synthesize_cloud(const CloudRecipe &recipe, const trap::TrapGeometry &geometry,
                            const trap::DriveSettings &drive, std::uint64_t seed) {
  if (!(recipe.initial_temperature >= 0.0))
    throw ValidationError("cloud recipe: initial temperature must be >= 0");
  CloudState state;
  state.rng.seed(seed);

  struct Placed {
    std::uint32_t id;
    std::size_t count;
  };
  std::vector<Placed> placed;
  const trap::IonSpecies *reference = nullptr;
  std::size_t total = 0;
  for (const auto &c : recipe.composition) {
    c.species.validate();
    if (c.count == 0)
      continue;
    if (!trap::stability_check(trap::mathieu_params(geometry, drive, c.species)).stable)
      continue;
    placed.push_back({state.add_species(c.species), c.count});
    total += c.count;
    if (!reference || (!reference->laser_cooled && c.species.laser_cooled))
      reference = &c.species;
  }
  if (total == 0)
    return state;

  const auto k = trap::pseudopotential_curvature(geometry, drive, *reference);
  const double m = reference->mass;
  const double w_r = std::sqrt(k.radial / m);
  const double w_z = std::sqrt(k.axial / m);
  const double density = units::epsilon0 * m * (2.0 * w_r * w_r + w_z * w_z) /
                         (reference->charge * reference->charge);
  const double volume = static_cast<double>(total) / density;
  const double aspect = cold_fluid_aspect_ratio(w_r, w_z);
  double radial = std::cbrt(3.0 * volume / (4.0 * units::pi * aspect));
  double axial = aspect * radial;
  radial = std::min(radial, 0.5 * geometry.r0);
  axial = std::min(axial, 0.5 * geometry.z0);

  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto &p : placed) {
    const double sigma_v =
        std::sqrt(units::boltzmann * recipe.initial_temperature / state.species[p.id].mass);
    for (std::size_t n = 0; n < p.count; ++n) {
      Vec3 u;
      do {
        u = {uniform(state.rng), uniform(state.rng), uniform(state.rng)};
      } while (dot(u, u) > 1.0);
      const Vec3 pos{u.x * radial, u.y * radial, u.z * axial};
      const Vec3 vel{sigma_v * normal(state.rng), sigma_v * normal(state.rng),
                     sigma_v * normal(state.rng)};
      state.add_ion(pos, vel, p.id);
    }
  }
  return state;
}

} // namespace paultrap::dynamics
