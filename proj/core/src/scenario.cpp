#include "paultrap/scenario.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "paultrap/csv.hpp"
#include "paultrap/digest.hpp"
#include "paultrap/errors.hpp"
#include "paultrap/loading.hpp"
#include "paultrap/seeding.hpp"
#include "paultrap/spectrometry.hpp"
#include "paultrap/units.hpp"

#ifndef PAULTRAP_VERSION
#define PAULTRAP_VERSION "0.0.0"
#endif

namespace paultrap::harness {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Preset, std::string_view>, 10> preset_names{{
    {Preset::stability, "stability"},
    {Preset::secular, "secular"},
    {Preset::volume, "volume"},
    {Preset::ratescan, "ratescan"},
    {Preset::loadcurve, "loadcurve"},
    {Preset::massspec, "massspec"},
    {Preset::fig4, "fig4"},
    {Preset::fig5, "fig5"},
    {Preset::fig6a, "fig6a"},
    {Preset::fig6b, "fig6b"},
}};

// Seed streams per pipeline; fixed so outputs never depend on preset order.
enum Stream : std::uint64_t { rate_scan_stream = 5, spectrum_stream = 4, massspec_stream = 6 };

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double u(double kg) { return kg / units::atomic_mass_unit; }

class Run {
public:
  Run(const ScenarioConfig &config, Preset preset, const fs::path &dir)
      : config_(config), preset_(preset), dir_(dir) {
    provenance_ = {config_digest(config), config.master_seed, tool_version(),
                   std::string(preset_name(preset))};
  }

  CsvWriter open(const std::string &name, const std::vector<std::string> &columns) {
    files_.push_back(name);
    return CsvWriter(dir_ / name, provenance_, columns);
  }

  const std::vector<std::string> &files() const { return files_; }

  void execute() {
    switch (preset_) {
    case Preset::stability: return stability();
    case Preset::secular: return secular();
    case Preset::volume: return volume();
    case Preset::ratescan: return ratescan();
    case Preset::loadcurve: return loadcurve();
    case Preset::massspec: return massspec();
    case Preset::fig4: return comparison("fig4", config_.spectrum.fig4_v_rf);
    case Preset::fig5: return fig5();
    case Preset::fig6a: return fig6a();
    case Preset::fig6b: return comparison("fig6b", config_.spectrum.fig6b_v_rf);
    }
  }

private:
  trap::DriveSettings drive_at(double v_rf) const {
    auto d = config_.drive;
    d.v_rf = v_rf;
    return d;
  }

  void stability() {
    auto csv = open("stability.csv", {"v_rf_v", "q_radial", "a_radial", "a_axial", "stable", "margin"});
    for (const double v : config_.sweep.grid()) {
      const auto p = trap::mathieu_params(config_.geometry, drive_at(v), config_.species);
      const auto s = trap::stability_check(p);
      csv.row({v, p.q_radial, p.a_radial, p.a_axial, std::int64_t{s.stable}, s.margin});
    }
    csv.close();
  }

  void secular() {
    const auto p = trap::mathieu_params(config_.geometry, config_.drive, config_.species);
    const auto nu = trap::secular_frequencies(p, config_.drive);
    auto csv = open("secular.csv", {"v_rf_v", "v_ec_v", "kappa_axial", "q_radial", "a_radial",
                                    "a_axial", "nu_radial_hz", "nu_radial_exact_hz", "nu_axial_hz"});
    csv.row({config_.drive.v_rf, config_.drive.v_ec, config_.geometry.kappa_axial, p.q_radial,
             p.a_radial, p.a_axial, nu.nu_radial, trap::exact_radial_frequency(p, config_.drive),
             nu.nu_axial});
    csv.close();
  }

  struct CapacityRow {
    double v_rf;
    trap::VolumeEstimate volume;
    double unscaled; // n0 * volume, 0 when unstable
  };

  std::vector<CapacityRow> capacity_table() const {
    std::vector<CapacityRow> rows;
    for (const double v : config_.sweep.grid()) {
      const auto d = drive_at(v);
      const auto vol = trap::trap_volume(config_.geometry, d, config_.species,
                                         {config_.loading.volume_resolution});
      const bool stable =
          trap::stability_check(trap::mathieu_params(config_.geometry, d, config_.species)).stable;
      rows.push_back({v, vol,
                      stable ? loading::capacity(d, config_.geometry, config_.species, vol) : 0.0});
    }
    return rows;
  }

  double loading_rate() const {
    return loading::two_photon_rate(config_.photoion, loading::oven_density(config_.oven));
  }

  double capacity_scale(const std::vector<CapacityRow> &table) const {
    if (config_.loading.capacity_scale > 0.0)
      return config_.loading.capacity_scale;
    std::vector<double> caps;
    for (const auto &r : table)
      caps.push_back(r.unscaled);
    return loading::calibrate_capacity_scale(caps, loading_rate(), config_.loading.background_loss,
                                             config_.loading.target_saturation);
  }

  loading::LoadingModel model_at(double v_rf, double scale) const {
    const auto d = drive_at(v_rf);
    const auto vol = trap::trap_volume(config_.geometry, d, config_.species,
                                       {config_.loading.volume_resolution});
    return {loading_rate(), loading::capacity(d, config_.geometry, config_.species, vol, scale),
            config_.loading.background_loss};
  }

  std::vector<double> times() const {
    std::vector<double> t(config_.loading.samples);
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = config_.loading.duration * static_cast<double>(i) /
             static_cast<double>(t.size() - 1);
    return t;
  }

  void volume() {
    auto csv = open("volume.csv", {"v_rf_v", "volume_m3", "depth_j", "grid_resolution_m",
                                   "capacity_unscaled"});
    for (const auto &r : capacity_table())
      csv.row({r.v_rf, r.volume.volume, r.volume.depth, r.volume.grid_resolution, r.unscaled});
    csv.close();
  }

  void ratescan() {
    const double density = loading::oven_density(config_.oven);
    auto csv = open("ratescan.csv", {"average_power_w", "peak_intensity_w_cm2", "rate_per_s",
                                     "cw_rate_per_s"});
    for (const double p : config_.rate_scan.powers) {
      const auto beam = loading::at_average_power(config_.photoion, p);
      csv.row({p, loading::peak_intensity(beam), loading::two_photon_rate(beam, density),
               loading::cw_two_photon_rate(beam, density)});
    }
    csv.close();
  }

  void fig5() {
    loading::RateScanOptions opt;
    opt.trials = config_.rate_scan.trials;
    opt.load_window = config_.rate_scan.window;
    opt.window_points = config_.rate_scan.window_points;
    opt.counting_noise = config_.rate_scan.counting_noise;
    opt.seed = derive_seed(config_.master_seed, rate_scan_stream, 0);
    const auto result = loading::rate_scan(config_.photoion, loading::oven_density(config_.oven),
                                           config_.rate_scan.powers, opt);
    auto rates = open("fig5_rates.csv", {"average_power_w", "rate_per_s", "error_per_s"});
    for (const auto &p : result.points)
      rates.row({p.average_power, p.rate, p.error});
    rates.close();
    auto fit = open("fig5_fit.csv", {"exponent", "exponent_error", "log_prefactor"});
    fit.row({result.exponent, result.exponent_error, result.log_prefactor});
    fit.close();
  }

  void loadcurve() {
    const double scale = capacity_scale(capacity_table());
    const auto model = model_at(config_.drive.v_rf, scale);
    const auto t = times();
    const auto n = loading::loading_curve(model, t);
    auto curve = open("loadcurve.csv", {"time_s", "ions"});
    for (std::size_t i = 0; i < t.size(); ++i)
      curve.row({t[i], n[i]});
    curve.close();
    auto summary = open("loadcurve_summary.csv",
                        {"v_rf_v", "rate_per_s", "capacity", "background_loss_per_s",
                         "saturation", "t95_s", "capacity_scale"});
    summary.row({config_.drive.v_rf, model.rate, model.capacity, model.background_loss,
                 model.saturation(), loading::time_to_fraction(model, 0.95), scale});
    summary.close();
  }

  void fig6a() {
    const auto table = capacity_table();
    const double scale = capacity_scale(table);
    const auto t = times();
    auto curves = open("fig6a_curves.csv", {"v_rf_v", "time_s", "ions"});
    for (const double v : config_.loading.curve_v_rf) {
      const auto n = loading::loading_curve(model_at(v, scale), t);
      for (std::size_t i = 0; i < t.size(); ++i)
        curves.row({v, t[i], n[i]});
    }
    curves.close();
    auto sat = open("fig6a_saturation.csv",
                    {"v_rf_v", "volume_m3", "capacity", "saturation", "t95_s"});
    const double rate = loading_rate();
    for (const auto &r : table) {
      if (r.unscaled <= 0.0)
        continue;
      const loading::LoadingModel m{rate, scale * r.unscaled, config_.loading.background_loss};
      sat.row({r.v_rf, r.volume.volume, m.capacity, m.saturation(),
               loading::time_to_fraction(m, 0.95)});
    }
    sat.close();
  }

  spectrometry::MeasurementSetup setup_at(double v_rf) const {
    spectrometry::MeasurementSetup s;
    s.geometry = config_.geometry;
    s.drive = drive_at(v_rf);
    s.integrator = config_.integrator;
    s.cooling = config_.cooling;
    s.ejection.detection_efficiency = config_.spectrum.detection_efficiency;
    return s;
  }

  spectrometry::SpectrumScan scan_with(dynamics::CloudRecipe recipe, std::uint64_t seed) const {
    const auto &sp = config_.spectrum;
    spectrometry::SpectrumScan scan;
    scan.frequency_grid = spectrometry::frequency_grid(sp.start, sp.stop, sp.step);
    scan.tickle_amplitude = sp.tickle_amplitude;
    scan.dwell = sp.dwell;
    scan.equilibration_time = sp.equilibration;
    scan.cloud = std::move(recipe);
    scan.control_runs = sp.control_runs;
    scan.master_seed = seed;
    scan.threads = sp.threads;
    return scan;
  }

  dynamics::CloudRecipe pure_recipe() const {
    dynamics::CloudRecipe r;
    r.composition = {{config_.species, config_.spectrum.ions}};
    r.initial_temperature = config_.spectrum.initial_temperature;
    return r;
  }

  void write_spectrum(const std::string &name, const spectrometry::SpectrumResult &result) {
    auto csv = open(name, {"frequency_hz", "survival_fraction", "counted", "baseline"});
    for (const auto &p : result.points)
      csv.row({p.frequency, p.survival_fraction, p.counted, p.baseline});
    csv.close();
  }

  void massspec() {
    const auto setup = setup_at(config_.drive.v_rf);
    const auto result = spectrometry::run_mass_spectrum(
        scan_with(pure_recipe(), derive_seed(config_.master_seed, massspec_stream, 0)), setup);
    write_spectrum("massspec.csv", result);
    const auto report = spectrometry::find_peaks(result, config_.spectrum.min_contrast);
    auto peaks = open("massspec_peaks.csv", {"center_hz", "contrast_pct", "width_hz", "mass_n1_u"});
    for (const auto &p : report.peaks) {
      double mass = std::numeric_limits<double>::quiet_NaN();
      try {
        mass = u(spectrometry::mass_from_peak(p.center, setup.drive, setup.geometry, 1,
                                              config_.species.charge));
      } catch (const UnstableParameters &) {
      }
      peaks.row({p.center, p.contrast, p.width, mass});
    }
    peaks.close();
  }

  // Photoionization (pure) versus electron-bombardment (mixture) spectra.
  void comparison(const std::string &stem, double v_rf) {
    const auto setup = setup_at(v_rf);
    const double resonance =
        spectrometry::analytic_resonances(config_.species, setup.drive, setup.geometry, 1)[0];
    const double w = config_.spectrum.contrast_window;
    const auto grid = spectrometry::frequency_grid(config_.spectrum.start, config_.spectrum.stop,
                                                   config_.spectrum.step);
    const auto in_window = std::count_if(grid.begin(), grid.end(), [&](double f) {
      return std::abs(f - resonance) <= 0.5 * w;
    });
    if (resonance - 0.5 * w < grid.front() || resonance + 0.5 * w > grid.back() || in_window < 3)
      throw ValidationError("spectrum grid must cover spectrum.contrast_window around " +
                            std::to_string(resonance) + " Hz with at least 3 points");
    const auto pure = spectrometry::run_mass_spectrum(
        scan_with(pure_recipe(), derive_seed(config_.master_seed, spectrum_stream, 0)), setup);
    const auto mixed = spectrometry::run_mass_spectrum(
        scan_with(eb_mixture_recipe(config_.electron_beam, config_.species, config_.spectrum.ions,
                                    config_.spectrum.initial_temperature, setup.geometry,
                                    setup.drive),
                  derive_seed(config_.master_seed, spectrum_stream, 1)),
        setup);
    write_spectrum(stem + "_tppi.csv", pure);
    write_spectrum(stem + "_eb.csv", mixed);

    auto summary = open(stem + "_summary.csv", {"source", "resonance_hz", "minimum_hz",
                                                "contrast_pct", "satellites"});
    for (const auto &[name, result] : {std::pair{"tppi", &pure}, std::pair{"eb", &mixed}}) {
      const auto report = spectrometry::find_peaks(*result, config_.spectrum.min_contrast);
      summary.row({std::string(name), resonance,
                   spectrometry::depletion_minimum(*result, resonance - 0.5 * w, resonance + 0.5 * w),
                   spectrometry::contrast(*result, resonance, w),
                   static_cast<std::uint64_t>(report.satellites.size())});
    }
    summary.close();
  }

  const ScenarioConfig &config_;
  Preset preset_;
  fs::path dir_;
  Provenance provenance_;
  std::vector<std::string> files_;
};

} // namespace

Preset parse_preset(std::string_view name) {
  for (const auto &[p, n] : preset_names)
    if (n == name)
      return p;
  std::string options;
  for (const auto &[p, n] : preset_names)
    options += (options.empty() ? "" : ", ") + std::string(n);
  throw ValidationError("unknown preset '" + std::string(name) + "' (accepted: " + options + ")");
}

std::string_view preset_name(Preset preset) {
  for (const auto &[p, n] : preset_names)
    if (p == preset)
      return n;
  return "unknown";
}

std::vector<Preset> all_presets() {
  std::vector<Preset> out;
  for (const auto &[p, n] : preset_names)
    out.push_back(p);
  return out;
}

std::string tool_version() { return PAULTRAP_VERSION; }

std::string record_file_name(Preset preset) {
  return std::string(preset_name(preset)) + "_record.json";
}

std::string record_to_json(const RunRecord &r) {
  nlohmann::ordered_json j;
  j["tool"] = r.tool;
  j["version"] = r.version;
  j["preset"] = r.preset;
  j["config_path"] = r.config_path;
  j["config_digest"] = r.config_digest;
  j["seed"] = r.seed;
  j["started"] = r.started;
  j["finished"] = r.finished;
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto &o : r.outputs)
    j["outputs"].push_back({{"file", o.name}, {"sha256", o.sha256}});
  return j.dump(2) + "\n";
}

RunRecord record_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunRecord r;
    r.tool = j.at("tool").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.preset = j.at("preset").get<std::string>();
    r.config_path = j.at("config_path").get<std::string>();
    r.config_digest = j.at("config_digest").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.started = j.at("started").get<std::string>();
    r.finished = j.at("finished").get<std::string>();
    for (const auto &o : j.at("outputs"))
      r.outputs.push_back({o.at("file").get<std::string>(), o.at("sha256").get<std::string>()});
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("malformed run record: ") + e.what());
  }
}

RunRecord read_record(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open run record '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return record_from_json(text.str());
}

DirectoryLock::DirectoryLock(const fs::path &directory) : path_(directory / ".paultrap.lock") {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0)
    throw ValidationError("cannot create lock file '" + path_.string() + "'");
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw ValidationError("output directory '" + directory.string() +
                          "' is in use by another paultrap process");
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    std::error_code ec;
    fs::remove(path_, ec);
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

dynamics::CloudRecipe eb_mixture_recipe(const loading::EBSource &source,
                                        const trap::IonSpecies &primary, std::size_t ions,
                                        double initial_temperature,
                                        const trap::TrapGeometry &geometry,
                                        const trap::DriveSettings &drive) {
  source.validate();
  auto trappable = [&](const trap::IonSpecies &s) {
    return trap::stability_check(trap::mathieu_params(geometry, drive, s)).stable;
  };
  if (!trappable(primary))
    throw UnstableParameters("mixture: primary species is not trappable at this drive");

  std::vector<loading::WeightedSpecies> kept{{primary, 1.0 - source.impurity_fraction}};
  double impurity_total = 0.0;
  for (const auto &w : source.impurity_species)
    if (w.weight > 0.0 && trappable(w.species))
      impurity_total += w.weight;
  if (impurity_total > 0.0)
    for (const auto &w : source.impurity_species)
      if (w.weight > 0.0 && trappable(w.species))
        kept.push_back({w.species, source.impurity_fraction * w.weight / impurity_total});
  if (kept.size() == 1)
    kept[0].weight = 1.0;

  std::vector<std::size_t> counts(kept.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double exact = static_cast<double>(ions) * kept[i].weight;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto &a, const auto &b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < ions; ++k, ++assigned)
    ++counts[remainders[k % remainders.size()].second];

  dynamics::CloudRecipe recipe;
  recipe.initial_temperature = initial_temperature;
  for (std::size_t i = 0; i < kept.size(); ++i)
    if (counts[i] > 0)
      recipe.composition.push_back({kept[i].species, counts[i]});
  return recipe;
}

RunRecord run_scenario(const ScenarioConfig &config, Preset preset, const fs::path &out_dir) {
  fs::create_directories(out_dir);
  DirectoryLock lock(out_dir);

  RunRecord record;
  record.version = tool_version();
  record.preset = std::string(preset_name(preset));
  record.config_path = config.source.empty() ? std::string{} : fs::absolute(config.source).string();
  record.config_digest = config_digest(config);
  record.seed = config.master_seed;
  record.started = utc_now();

  Run run(config, preset, out_dir);
  run.execute();

  for (const auto &name : run.files())
    record.outputs.push_back({name, sha256_file(out_dir / name)});
  record.finished = utc_now();

  std::ofstream out(out_dir / record_file_name(preset), std::ios::binary | std::ios::trunc);
  out << record_to_json(record);
  if (!out)
    throw SimulationError("cannot write run record in '" + out_dir.string() + "'");
  return record;
}

bool ReplayReport::passed() const {
  return !files.empty() &&
         std::all_of(files.begin(), files.end(), [](const FileVerdict &f) { return f.pass; });
}

ReplayReport replay(const fs::path &record_path, const std::optional<fs::path> &config_path) {
  const auto record = read_record(record_path);
  const fs::path cfg_path = config_path ? *config_path : fs::path(record.config_path);
  if (cfg_path.empty())
    throw ValidationError("run record does not name a configuration file; pass one explicitly");
  auto config = load_config(cfg_path);
  const auto digest = config_digest(config);
  if (digest != record.config_digest)
    throw DigestMismatch("configuration digest " + digest + " does not match the recorded " +
                         record.config_digest);
  config.master_seed = record.seed;
  const Preset preset = parse_preset(record.preset);

  std::string tmpl = (fs::temp_directory_path() / "paultrap-replay-XXXXXX").string();
  if (!::mkdtemp(tmpl.data()))
    throw SimulationError("cannot create a scratch directory for replay");
  const fs::path scratch(tmpl);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{scratch};

  run_scenario(config, preset, scratch);

  ReplayReport report;
  const fs::path recorded_dir = record_path.parent_path();
  for (const auto &o : record.outputs) {
    FileVerdict v{o.name, false, {}};
    const fs::path original = recorded_dir / o.name;
    const fs::path fresh = scratch / o.name;
    if (!fs::exists(original))
      v.detail = "recorded file is missing";
    else if (!fs::exists(fresh))
      v.detail = "replay did not produce this file";
    else {
      v.detail = first_difference(original, fresh);
      v.pass = v.detail.empty();
    }
    report.files.push_back(std::move(v));
  }
  return report;
}

} // namespace paultrap::harness
