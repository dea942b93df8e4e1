#include "paultrap/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "paultrap/digest.hpp"
#include "paultrap/errors.hpp"
#include "paultrap/units.hpp"

namespace paultrap::harness {

namespace {

struct Unit {
  const char *symbol;
  double factor;
  double offset = 0.0; // SI = factor * value + offset
};

struct Dimension {
  const char *name;
  const char *canonical; // SI symbol used in the canonical listing
  std::vector<Unit> units;
};

const Dimension length{"length", "m", {{"m", 1}, {"cm", 1e-2}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}}};
const Dimension frequency{"frequency", "Hz", {{"Hz", 1}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}}};
const Dimension angular{"angular frequency",
                        "rad/s",
                        {{"rad/s", 1},
                         {"Hz", units::two_pi},
                         {"kHz", units::two_pi * 1e3},
                         {"MHz", units::two_pi * 1e6}}};
const Dimension voltage{"voltage", "V", {{"V", 1}, {"kV", 1e3}, {"mV", 1e-3}}};
const Dimension time_dim{"time", "s", {{"s", 1}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}, {"ps", 1e-12}, {"fs", 1e-15}}};
const Dimension energy{"energy", "J", {{"J", 1}, {"uJ", 1e-6}, {"nJ", 1e-9}, {"pJ", 1e-12}}};
const Dimension electron_volts{"energy", "eV", {{"eV", 1}, {"keV", 1e3}}};
const Dimension current{"current", "A", {{"A", 1}, {"mA", 1e-3}}};
const Dimension temperature{"temperature", "K", {{"K", 1}, {"mK", 1e-3}, {"uK", 1e-6}, {"degC", 1, units::celsius_offset}}};
const Dimension mass{"mass", "kg", {{"kg", 1}, {"u", units::atomic_mass_unit}, {"amu", units::atomic_mass_unit}}};
const Dimension charge{"charge", "C", {{"C", 1}, {"e", units::elementary_charge}}};
const Dimension power{"power", "W", {{"W", 1}, {"mW", 1e-3}, {"uW", 1e-6}}};
const Dimension rate{"rate", "1/s", {{"1/s", 1}, {"Hz", 1}}};
const Dimension area{"area", "m2", {{"m2", 1}, {"cm2", 1e-4}, {"Mb", 1e-22}}};
const Dimension rate_coefficient{"rate coefficient", "m3/s/(W/cm2)^2", {{"m3/s/(W/cm2)^2", 1}}};

enum class Kind { quantity, quantity_or_auto, quantity_list, number, number_or_auto, number_list, integer, boolean, choice, text, vector };
enum class Constraint { any, positive, non_negative, fraction };

struct Value {
  double number = 0.0;
  bool automatic = false;
  std::vector<double> list;
  std::int64_t integer = 0;
  bool flag = false;
  std::string text;
  Vec3 vec;
};

struct Key {
  std::string section;
  std::string name;
  Kind kind;
  const Dimension *dim = nullptr;
  const char *fallback = nullptr; // config text; nullptr = required
  Constraint constraint = Constraint::any;
  std::vector<std::string> choices;
  std::function<void(ScenarioConfig &, const Value &)> set;
  std::function<Value(const ScenarioConfig &)> get;

  std::string path() const { return section + "." + name; }
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Field accessor used for both directions.
template <class T> using Ref = std::function<T &(ScenarioConfig &)>;

template <class T> T &mut(const Ref<T> &ref, const ScenarioConfig &c) {
  return ref(const_cast<ScenarioConfig &>(c));
}

Key quantity(std::string s, std::string n, const Dimension &d, const char *fb, Constraint c,
             Ref<double> ref) {
  return {std::move(s), std::move(n), Kind::quantity, &d, fb, c, {},
          [ref](ScenarioConfig &cfg, const Value &v) { ref(cfg) = v.number; },
          [ref](const ScenarioConfig &cfg) { Value v; v.number = mut(ref, cfg); return v; }};
}

Key number(std::string s, std::string n, const char *fb, Constraint c, Ref<double> ref) {
  Key k = quantity(std::move(s), std::move(n), length, fb, c, std::move(ref));
  k.kind = Kind::number;
  k.dim = nullptr;
  return k;
}

Key quantity_list(std::string s, std::string n, const Dimension &d, const char *fb, Constraint c,
                  Ref<std::vector<double>> ref) {
  return {std::move(s), std::move(n), Kind::quantity_list, &d, fb, c, {},
          [ref](ScenarioConfig &cfg, const Value &v) { ref(cfg) = v.list; },
          [ref](const ScenarioConfig &cfg) { Value v; v.list = mut(ref, cfg); return v; }};
}

template <class Int>
Key integer(std::string s, std::string n, const char *fb, Constraint c, Ref<Int> ref) {
  return {std::move(s), std::move(n), Kind::integer, nullptr, fb, c, {},
          [ref](ScenarioConfig &cfg, const Value &v) { ref(cfg) = static_cast<Int>(v.integer); },
          [ref](const ScenarioConfig &cfg) {
            Value v;
            v.integer = static_cast<std::int64_t>(mut(ref, cfg));
            return v;
          }};
}

Key boolean(std::string s, std::string n, const char *fb, Ref<bool> ref) {
  return {std::move(s), std::move(n), Kind::boolean, nullptr, fb, Constraint::any, {},
          [ref](ScenarioConfig &cfg, const Value &v) { ref(cfg) = v.flag; },
          [ref](const ScenarioConfig &cfg) { Value v; v.flag = mut(ref, cfg); return v; }};
}

template <class Enum>
Key choice(std::string s, std::string n, const char *fb, std::vector<std::string> names,
           Ref<Enum> ref) {
  return {std::move(s), std::move(n), Kind::choice, nullptr, fb, Constraint::any, names,
          [ref](ScenarioConfig &cfg, const Value &v) { ref(cfg) = static_cast<Enum>(v.integer); },
          [ref](const ScenarioConfig &cfg) {
            Value v;
            v.integer = static_cast<std::int64_t>(mut(ref, cfg));
            return v;
          }};
}

std::vector<Key> build_schema() {
  using C = ScenarioConfig;
  const auto P = Constraint::positive;
  const auto NN = Constraint::non_negative;
  const auto F = Constraint::fraction;
  const auto A = Constraint::any;
  std::vector<Key> k;

  k.push_back(integer<std::uint64_t>("run", "master_seed", "1", NN, [](C &c) -> std::uint64_t & { return c.master_seed; }));
  k.push_back({"run", "output_directory", Kind::text, nullptr, "out", A, {},
               [](C &c, const Value &v) { c.output_directory = v.text; },
               [](const C &c) { Value v; v.text = c.output_directory.string(); return v; }});

  k.push_back(quantity("trap", "r0", length, nullptr, P, [](C &c) -> double & { return c.geometry.r0; }));
  k.push_back(quantity("trap", "z0", length, nullptr, P, [](C &c) -> double & { return c.geometry.z0; }));
  k.push_back(quantity("trap", "rod_diameter", length, "6.35 mm", P, [](C &c) -> double & { return c.geometry.rod_diameter; }));
  k.push_back(number("trap", "eta_rf", "1", P, [](C &c) -> double & { return c.geometry.eta_rf; }));
  k.push_back({"trap", "kappa_axial", Kind::number_or_auto, nullptr, "auto", P, {},
               [](C &c, const Value &v) {
                 c.kappa_calibrated = v.automatic;
                 if (!v.automatic)
                   c.geometry.kappa_axial = v.number;
               },
               [](const C &c) {
                 Value v;
                 v.automatic = c.kappa_calibrated;
                 v.number = c.geometry.kappa_axial;
                 return v;
               }});
  k.push_back(quantity("trap", "axial_frequency", frequency, "20 kHz", P, [](C &c) -> double & { return c.axial_frequency; }));

  k.push_back(quantity("drive", "omega_rf", angular, nullptr, P, [](C &c) -> double & { return c.drive.omega_rf; }));
  k.push_back(quantity("drive", "v_rf", voltage, nullptr, NN, [](C &c) -> double & { return c.drive.v_rf; }));
  k.push_back(quantity("drive", "v_ec", voltage, nullptr, NN, [](C &c) -> double & { return c.drive.v_ec; }));
  k.push_back(quantity("drive", "v_dc", voltage, "0 V", Constraint::any, [](C &c) -> double & { return c.drive.v_dc; }));

  k.push_back({"species", "name", Kind::text, nullptr, "Sr+", A, {},
               [](C &c, const Value &v) { c.species.name = v.text; },
               [](const C &c) { Value v; v.text = c.species.name; return v; }});
  k.push_back(quantity("species", "mass", mass, "88 u", P, [](C &c) -> double & { return c.species.mass; }));
  k.push_back(quantity("species", "charge", charge, "1 e", P, [](C &c) -> double & { return c.species.charge; }));
  k.push_back(boolean("species", "laser_cooled", "true", [](C &c) -> bool & { return c.species.laser_cooled; }));

  k.push_back(boolean("cooling", "enabled", "true", [](C &c) -> bool & { return c.cooling.on; }));
  k.push_back(quantity("cooling", "wavelength", length, "422 nm", P, [](C &c) -> double & { return c.cooling.wavelength; }));
  k.push_back(quantity("cooling", "linewidth", angular, "20.2 MHz", P, [](C &c) -> double & { return c.cooling.gamma; }));
  k.push_back(quantity("cooling", "detuning", angular, "-10.1 MHz", A, [](C &c) -> double & { return c.cooling.detuning; }));
  k.push_back(number("cooling", "saturation", "1", NN, [](C &c) -> double & { return c.cooling.saturation_s; }));
  k.push_back({"cooling", "direction", Kind::vector, nullptr, "1 1 1", A, {},
               [](C &c, const Value &v) { c.cooling.direction = v.vec; },
               [](const C &c) { Value v; v.vec = c.cooling.direction; return v; }});

  k.push_back(choice<dynamics::FieldMode>("integrator", "field_mode", "full_rf", {"full_rf", "secular"},
                                          [](C &c) -> dynamics::FieldMode & { return c.integrator.field_mode; }));
  k.push_back({"integrator", "dt", Kind::quantity_or_auto, &time_dim, "auto", P, {},
               [](C &c, const Value &v) { c.integrator.dt = v.automatic ? 0.0 : v.number; },
               [](const C &c) {
                 Value v;
                 v.automatic = c.integrator.dt == 0.0;
                 v.number = c.integrator.dt;
                 return v;
               }});
  k.push_back(choice<dynamics::CoulombMode>("integrator", "coulomb", "direct", {"off", "direct", "cell_list"},
                                            [](C &c) -> dynamics::CoulombMode & { return c.integrator.coulomb; }));
  k.push_back(quantity("integrator", "softening_length", length, "100 nm", NN, [](C &c) -> double & { return c.integrator.softening_length; }));
  k.push_back(boolean("integrator", "deterministic_reduction", "true", [](C &c) -> bool & { return c.integrator.deterministic_reduction; }));
  k.push_back(integer<unsigned>("integrator", "threads", "1", NN, [](C &c) -> unsigned & { return c.integrator.threads; }));

  k.push_back(quantity("photoionization", "pulse_energy", energy, "0.15 nJ", P, [](C &c) -> double & { return c.photoion.pulse_energy; }));
  k.push_back(quantity("photoionization", "pulse_duration", time_dim, "50 fs", P, [](C &c) -> double & { return c.photoion.pulse_duration_fwhm; }));
  k.push_back(quantity("photoionization", "rep_rate", frequency, "100 MHz", P, [](C &c) -> double & { return c.photoion.rep_rate; }));
  k.push_back(quantity("photoionization", "waist", length, "20 um", P, [](C &c) -> double & { return c.photoion.waist; }));
  k.push_back(quantity("photoionization", "wavelength", length, "431 nm", P, [](C &c) -> double & { return c.photoion.wavelength; }));
  k.push_back(quantity("photoionization", "linewidth", length, "0.7 nm", P, [](C &c) -> double & { return c.photoion.two_photon_linewidth_fwhm; }));
  k.push_back(quantity("photoionization", "cross_section", area, "5600 Mb", P, [](C &c) -> double & { return c.photoion.intermediate_cross_section; }));
  k.push_back(quantity("photoionization", "rate_coefficient", rate_coefficient, nullptr, NN, [](C &c) -> double & { return c.photoion.rate_coefficient; }));
  k.push_back(choice<loading::PulseShape>("photoionization", "pulse_shape", "gaussian", {"gaussian", "sech2"},
                                          [](C &c) -> loading::PulseShape & { return c.photoion.shape; }));

  k.push_back(quantity("oven", "current", current, "1.0 A", P, [](C &c) -> double & { return c.oven.current; }));
  k.push_back(quantity("oven", "calibration_current_low", current, "0.8 A", P, [](C &c) -> double & { return c.oven.calibration_current_low; }));
  k.push_back(quantity("oven", "calibration_temperature_low", temperature, "110 degC", P, [](C &c) -> double & { return c.oven.calibration_temp_low; }));
  k.push_back(quantity("oven", "calibration_current_high", current, "1.2 A", P, [](C &c) -> double & { return c.oven.calibration_current_high; }));
  k.push_back(quantity("oven", "calibration_temperature_high", temperature, "170 degC", P, [](C &c) -> double & { return c.oven.calibration_temp_high; }));
  k.push_back(quantity("oven", "min_current", current, "0.5 A", P, [](C &c) -> double & { return c.oven.min_current; }));
  k.push_back(quantity("oven", "max_current", current, "1.3 A", P, [](C &c) -> double & { return c.oven.max_current; }));
  k.push_back(number("oven", "antoine_a", "2.772", A, [](C &c) -> double & { return c.oven.vapor.a; }));
  k.push_back(quantity("oven", "antoine_b", temperature, "5659.7 K", P, [](C &c) -> double & { return c.oven.vapor.b; }));

  k.push_back(quantity("electron_beam", "energy", electron_volts, "300 eV", P, [](C &c) -> double & { return c.electron_beam.electron_energy; }));
  k.push_back(quantity("electron_beam", "rate", rate, "100 1/s", NN, [](C &c) -> double & { return c.electron_beam.effective_rate; }));
  k.push_back(number("electron_beam", "impurity_fraction", "0.34", F, [](C &c) -> double & { return c.electron_beam.impurity_fraction; }));
  k.push_back({"electron_beam", "impurity_masses", Kind::quantity_list, &mass, "18 u, 28 u, 44 u, 104 u", P, {},
               [](C &c, const Value &v) {
                 auto &list = c.electron_beam.impurity_species;
                 list.clear();
                 for (const double m : v.list) {
                   trap::IonSpecies s;
                   s.name = "X" + std::to_string(std::lround(m / units::atomic_mass_unit));
                   s.mass = m;
                   s.charge = units::elementary_charge;
                   s.laser_cooled = false;
                   list.push_back({s, 0.0});
                 }
               },
               [](const C &c) {
                 Value v;
                 for (const auto &w : c.electron_beam.impurity_species)
                   v.list.push_back(w.species.mass);
                 return v;
               }});
  k.push_back({"electron_beam", "impurity_weights", Kind::number_list, nullptr, "0.25, 0.25, 0.25, 0.25", NN, {},
               [](C &c, const Value &v) {
                 auto &list = c.electron_beam.impurity_species;
                 if (v.list.size() != list.size())
                   throw ValidationError("electron_beam.impurity_weights: expected " +
                                         std::to_string(list.size()) +
                                         " weights (one per impurity mass)");
                 for (std::size_t i = 0; i < list.size(); ++i)
                   list[i].weight = v.list[i];
               },
               [](const C &c) {
                 Value v;
                 for (const auto &w : c.electron_beam.impurity_species)
                   v.list.push_back(w.weight);
                 return v;
               }});

  k.push_back(quantity("loading", "background_loss", rate, "0.005 1/s", NN, [](C &c) -> double & { return c.loading.background_loss; }));
  k.push_back(number("loading", "target_saturation", "4e4", P, [](C &c) -> double & { return c.loading.target_saturation; }));
  k.push_back({"loading", "capacity_scale", Kind::number_or_auto, nullptr, "auto", P, {},
               [](C &c, const Value &v) { c.loading.capacity_scale = v.automatic ? 0.0 : v.number; },
               [](const C &c) {
                 Value v;
                 v.automatic = c.loading.capacity_scale == 0.0;
                 v.number = c.loading.capacity_scale;
                 return v;
               }});
  k.push_back(quantity("loading", "volume_resolution", length, "80 um", P, [](C &c) -> double & { return c.loading.volume_resolution; }));
  k.push_back(quantity("loading", "duration", time_dim, "120 s", P, [](C &c) -> double & { return c.loading.duration; }));
  k.push_back(integer<std::size_t>("loading", "samples", "121", P, [](C &c) -> std::size_t & { return c.loading.samples; }));
  k.push_back(quantity_list("loading", "curve_v_rf", voltage, "80 V, 125 V, 180 V, 250 V, 350 V, 500 V", P,
                            [](C &c) -> std::vector<double> & { return c.loading.curve_v_rf; }));

  k.push_back(quantity_list("rate_scan", "powers", power, "3 mW, 5 mW, 7 mW, 9 mW, 11 mW, 13 mW, 15 mW", P,
                            [](C &c) -> std::vector<double> & { return c.rate_scan.powers; }));
  k.push_back(integer<std::size_t>("rate_scan", "trials", "20", P, [](C &c) -> std::size_t & { return c.rate_scan.trials; }));
  k.push_back(quantity("rate_scan", "window", time_dim, "1 s", P, [](C &c) -> double & { return c.rate_scan.window; }));
  k.push_back(integer<std::size_t>("rate_scan", "window_points", "5", P, [](C &c) -> std::size_t & { return c.rate_scan.window_points; }));
  k.push_back(boolean("rate_scan", "counting_noise", "true", [](C &c) -> bool & { return c.rate_scan.counting_noise; }));

  k.push_back(quantity("spectrum", "start", frequency, "50 kHz", P, [](C &c) -> double & { return c.spectrum.start; }));
  k.push_back(quantity("spectrum", "stop", frequency, "1000 kHz", P, [](C &c) -> double & { return c.spectrum.stop; }));
  k.push_back(quantity("spectrum", "step", frequency, "5 kHz", P, [](C &c) -> double & { return c.spectrum.step; }));
  k.push_back(quantity("spectrum", "tickle_amplitude", voltage, "16 V", NN, [](C &c) -> double & { return c.spectrum.tickle_amplitude; }));
  k.push_back(quantity("spectrum", "dwell", time_dim, "0.5 ms", P, [](C &c) -> double & { return c.spectrum.dwell; }));
  k.push_back(quantity("spectrum", "equilibration", time_dim, "0.2 ms", NN, [](C &c) -> double & { return c.spectrum.equilibration; }));
  k.push_back(integer<std::size_t>("spectrum", "ions", "200", P, [](C &c) -> std::size_t & { return c.spectrum.ions; }));
  k.push_back(quantity("spectrum", "initial_temperature", temperature, "10 mK", NN, [](C &c) -> double & { return c.spectrum.initial_temperature; }));
  k.push_back(integer<std::size_t>("spectrum", "control_runs", "3", P, [](C &c) -> std::size_t & { return c.spectrum.control_runs; }));
  k.push_back(integer<unsigned>("spectrum", "threads", "1", NN, [](C &c) -> unsigned & { return c.spectrum.threads; }));
  k.push_back(number("spectrum", "detection_efficiency", "1", F, [](C &c) -> double & { return c.spectrum.detection_efficiency; }));
  k.push_back(quantity("spectrum", "fig4_v_rf", voltage, "500 V", P, [](C &c) -> double & { return c.spectrum.fig4_v_rf; }));
  k.push_back(quantity("spectrum", "fig6b_v_rf", voltage, "350 V", P, [](C &c) -> double & { return c.spectrum.fig6b_v_rf; }));
  k.push_back(integer<int>("spectrum", "max_subharmonic", "2", P, [](C &c) -> int & { return c.spectrum.max_subharmonic; }));
  k.push_back(number("spectrum", "min_contrast", "10", P, [](C &c) -> double & { return c.spectrum.min_contrast; }));
  k.push_back(quantity("spectrum", "contrast_window", frequency, "60 kHz", P, [](C &c) -> double & { return c.spectrum.contrast_window; }));

  k.push_back(quantity("sweep", "v_rf_start", voltage, "50 V", P, [](C &c) -> double & { return c.sweep.v_rf_start; }));
  k.push_back(quantity("sweep", "v_rf_stop", voltage, "500 V", P, [](C &c) -> double & { return c.sweep.v_rf_stop; }));
  k.push_back(quantity("sweep", "v_rf_step", voltage, "5 V", P, [](C &c) -> double & { return c.sweep.v_rf_step; }));
  return k;
}

const std::vector<Key> &schema() {
  static const std::vector<Key> keys = build_schema();
  return keys;
}

struct Entry {
  std::string text;
  int line = 0;
  int column = 0;     // of the value
  int key_column = 0; // of the key
};

[[noreturn]] void fail(const Key &key, const Entry &e, const std::string &why) {
  throw ParseError(key.path() + ": " + why, e.line, e.column);
}

double parse_number(const Key &key, const Entry &e, const std::string &token, int column) {
  char *end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (token.empty() || end == token.c_str() || *end != '\0' || !std::isfinite(v))
    throw ParseError(key.path() + ": malformed number '" + token + "'", e.line, column);
  return v;
}

std::string accepted_units(const Dimension &d) {
  std::string s;
  for (const auto &u : d.units)
    s += (s.empty() ? "" : ", ") + std::string(u.symbol);
  return s;
}

// "<number> <unit>" -> SI.
double parse_quantity(const Key &key, const Entry &e, const std::string &item, int column) {
  const auto split = item.find_first_of(" \t");
  if (split == std::string::npos)
    throw ParseError(key.path() + ": missing unit in '" + item + "' (accepted: " +
                         accepted_units(*key.dim) + ")",
                     e.line, column);
  const double v = parse_number(key, e, item.substr(0, split), column);
  const std::string unit = trim(item.substr(split));
  for (const auto &u : key.dim->units)
    if (unit == u.symbol)
      return v * u.factor + u.offset;
  throw ParseError(key.path() + ": unit '" + unit + "' is not a " + key.dim->name +
                       " unit (accepted: " + accepted_units(*key.dim) + ")",
                   e.line, column + static_cast<int>(split) + 1);
}

std::vector<std::pair<std::string, int>> split_list(const Entry &e) {
  std::vector<std::pair<std::string, int>> items;
  std::size_t start = 0;
  while (true) {
    const auto comma = e.text.find(',', start);
    const std::string raw = e.text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto lead = raw.find_first_not_of(" \t");
    items.emplace_back(trim(raw), e.column + static_cast<int>(start + (lead == std::string::npos ? 0 : lead)));
    if (comma == std::string::npos)
      break;
    start = comma + 1;
  }
  return items;
}

void check(const Key &key, const Entry &e, double v) {
  switch (key.constraint) {
  case Constraint::positive:
    if (!(v > 0.0))
      fail(key, e, "must be > 0");
    break;
  case Constraint::non_negative:
    if (!(v >= 0.0))
      fail(key, e, "must be >= 0");
    break;
  case Constraint::fraction:
    if (!(v >= 0.0 && v <= 1.0))
      fail(key, e, "must lie in [0, 1]");
    break;
  case Constraint::any:
    break;
  }
}

Value parse_value(const Key &key, const Entry &e) {
  Value v;
  const std::string &t = e.text;
  switch (key.kind) {
  case Kind::quantity_or_auto:
  case Kind::number_or_auto:
    if (t == "auto") {
      v.automatic = true;
      return v;
    }
    [[fallthrough]];
  case Kind::quantity:
  case Kind::number:
    v.number = key.dim ? parse_quantity(key, e, t, e.column) : parse_number(key, e, t, e.column);
    check(key, e, v.number);
    return v;
  case Kind::quantity_list:
  case Kind::number_list:
    for (const auto &[item, col] : split_list(e)) {
      const double x = key.dim ? parse_quantity(key, e, item, col) : parse_number(key, e, item, col);
      check(key, e, x);
      v.list.push_back(x);
    }
    return v;
  case Kind::integer: {
    char *end = nullptr;
    errno = 0;
    const long long x = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || *end != '\0' || errno != 0)
      fail(key, e, "malformed integer '" + t + "'");
    if (key.constraint == Constraint::positive && x <= 0)
      fail(key, e, "must be > 0");
    if (x < 0)
      fail(key, e, "must be >= 0");
    if (key.path() == "run.master_seed") {
      // Full 64-bit range for seeds.
      v.integer = static_cast<std::int64_t>(std::strtoull(t.c_str(), nullptr, 10));
      return v;
    }
    v.integer = x;
    return v;
  }
  case Kind::boolean:
    if (t == "true" || t == "yes" || t == "on")
      v.flag = true;
    else if (t == "false" || t == "no" || t == "off")
      v.flag = false;
    else
      fail(key, e, "expected true or false, found '" + t + "'");
    return v;
  case Kind::choice:
    for (std::size_t i = 0; i < key.choices.size(); ++i)
      if (t == key.choices[i]) {
        v.integer = static_cast<std::int64_t>(i);
        return v;
      }
    {
      std::string options;
      for (const auto &c : key.choices)
        options += (options.empty() ? "" : ", ") + c;
      fail(key, e, "unknown option '" + t + "' (accepted: " + options + ")");
    }
  case Kind::text:
    if (t.empty())
      fail(key, e, "empty value");
    v.text = t;
    return v;
  case Kind::vector: {
    std::istringstream in(t);
    std::string a, b, c, extra;
    if (!(in >> a >> b >> c) || (in >> extra))
      fail(key, e, "expected three components");
    Vec3 d{parse_number(key, e, a, e.column), parse_number(key, e, b, e.column),
           parse_number(key, e, c, e.column)};
    const double n = norm(d);
    if (!(n > 0.0))
      fail(key, e, "direction must be nonzero");
    v.vec = d * (1.0 / n);
    return v;
  }
  }
  return v;
}

std::string render(const Key &key, const Value &v) {
  auto with_unit = [&](double x) { return key.dim ? fmt(x) + " " + key.dim->canonical : fmt(x); };
  switch (key.kind) {
  case Kind::quantity_or_auto:
  case Kind::number_or_auto:
    if (v.automatic)
      return "auto";
    [[fallthrough]];
  case Kind::quantity:
  case Kind::number:
    return with_unit(v.number);
  case Kind::quantity_list:
  case Kind::number_list: {
    std::string s;
    for (const double x : v.list)
      s += (s.empty() ? "" : ", ") + with_unit(x);
    return s;
  }
  case Kind::integer:
    if (key.path() == "run.master_seed")
      return std::to_string(static_cast<std::uint64_t>(v.integer));
    return std::to_string(v.integer);
  case Kind::boolean:
    return v.flag ? "true" : "false";
  case Kind::choice:
    return key.choices.at(static_cast<std::size_t>(v.integer));
  case Kind::text:
    return v.text;
  case Kind::vector:
    return fmt(v.vec.x) + " " + fmt(v.vec.y) + " " + fmt(v.vec.z);
  }
  return {};
}

std::map<std::string, Entry> tokenize(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string line(text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos)
      continue;
    const int col = static_cast<int>(first) + 1;
    if (line[first] == '[') {
      const auto close = line.find(']', first);
      if (close == std::string::npos)
        throw ParseError("unterminated section header", line_no, col);
      if (!trim(line.substr(close + 1)).empty())
        throw ParseError("unexpected text after section header", line_no, static_cast<int>(close) + 2);
      section = trim(line.substr(first + 1, close - first - 1));
      if (section.empty())
        throw ParseError("empty section name", line_no, col);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected 'key = value'", line_no, col);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ParseError("missing key before '='", line_no, col);
    if (section.empty())
      throw ParseError("key '" + key + "' outside of any [section]", line_no, col);
    const auto vstart = line.find_first_not_of(" \t", eq + 1);
    Entry e;
    e.text = vstart == std::string::npos ? std::string{} : trim(line.substr(vstart));
    e.line = line_no;
    e.column = static_cast<int>(vstart == std::string::npos ? eq + 2 : vstart + 1);
    if (e.text.empty())
      throw ParseError("missing value for '" + section + "." + key + "'", line_no, e.column);
    const std::string path = section + "." + key;
    if (entries.count(path))
      throw ParseError("duplicate key '" + path + "'", line_no, col);
    e.key_column = col;
    entries[path] = e;
  }
  return entries;
}

void validate_resolved(const ScenarioConfig &c) {
  c.geometry.validate();
  c.drive.validate();
  c.species.validate();
  c.cooling.validate();
  c.photoion.validate();
  c.oven.validate();
  c.electron_beam.validate();
  if (c.integrator.dt > 0.0)
    c.integrator.validate(c.drive);
  if (!(c.spectrum.stop >= c.spectrum.start))
    throw ValidationError("spectrum.stop must be >= spectrum.start");
  if (c.spectrum.ions < 1)
    throw ValidationError("spectrum.ions must be >= 1");
  if (!(c.sweep.v_rf_stop >= c.sweep.v_rf_start))
    throw ValidationError("sweep.v_rf_stop must be >= sweep.v_rf_start");
  if (c.loading.samples < 2)
    throw ValidationError("loading.samples must be >= 2");
  if (c.rate_scan.powers.size() < 4)
    throw ValidationError("rate_scan.powers needs at least 4 entries");
  if (c.rate_scan.window_points < 2)
    throw ValidationError("rate_scan.window_points must be >= 2");
  if (c.loading.curve_v_rf.empty())
    throw ValidationError("loading.curve_v_rf needs at least one voltage");
  if (c.loading.volume_resolution > c.geometry.r0 / 20.0)
    throw ValidationError("loading.volume_resolution must be <= trap.r0 / 20");
}

} // namespace

std::vector<double> SweepSettings::grid() const {
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((v_rf_stop - v_rf_start) / v_rf_step + 1e-9)) + 1;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(v_rf_start + v_rf_step * static_cast<double>(i));
  return out;
}

ScenarioConfig parse_config(std::string_view text, const std::filesystem::path &source) {
  auto entries = tokenize(text);
  const auto &keys = schema();

  for (const auto &[path, e] : entries) {
    bool known = false;
    for (const auto &k : keys)
      known = known || k.path() == path;
    if (!known)
      throw ParseError("unknown key '" + path + "'", e.line, e.key_column);
  }

  ScenarioConfig config;
  config.source = source;
  for (const auto &key : keys) {
    const auto it = entries.find(key.path());
    Entry e;
    if (it != entries.end()) {
      e = it->second;
    } else if (key.fallback) {
      e.text = key.fallback;
    } else {
      throw ValidationError("missing required key '" + key.path() + "'");
    }
    try {
      key.set(config, parse_value(key, e));
    } catch (const ParseError &) {
      throw;
    } catch (const ValidationError &err) {
      if (e.line > 0)
        throw ParseError(err.what(), e.line, e.column);
      throw;
    }
  }

  if (config.kappa_calibrated)
    config.geometry.kappa_axial =
        trap::calibrate_kappa(config.axial_frequency, config.geometry, config.drive, config.species);
  validate_resolved(config);
  return config;
}

ScenarioConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open configuration file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

namespace {

std::string listing(const ScenarioConfig &config, bool with_run) {
  std::string out, section;
  for (const auto &key : schema()) {
    if (!with_run && key.section == "run")
      continue;
    if (key.section != section) {
      section = key.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += key.name + " = " + render(key, key.get(config)) + "\n";
  }
  return out;
}

} // namespace

std::string canonical_text(const ScenarioConfig &config) { return listing(config, true); }

std::string config_digest(const ScenarioConfig &config) {
  return sha256_hex(listing(config, false));
}

} // namespace paultrap::harness
