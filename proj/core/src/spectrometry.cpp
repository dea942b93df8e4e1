#include "paultrap/spectrometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "paultrap/errors.hpp"
#include "paultrap/parallel.hpp"
#include "paultrap/seeding.hpp"

namespace paultrap::spectrometry {

namespace {

constexpr std::uint64_t control_stream = 1;
constexpr std::uint64_t point_stream = 2;

dynamics::SimulationContext make_context(const MeasurementSetup &setup,
                                         const dynamics::CloudState &cloud) {
  dynamics::SimulationContext ctx;
  ctx.geometry = setup.geometry;
  ctx.drive = setup.drive;
  ctx.integrator = setup.integrator;
  ctx.cooling = setup.cooling;
  if (ctx.integrator.dt == 0.0)
    ctx.integrator.dt = dynamics::default_timestep(ctx.integrator.field_mode, setup.geometry,
                                                   setup.drive, cloud.species);
  return ctx;
}

std::size_t recipe_size(const dynamics::CloudRecipe &recipe) {
  std::size_t n = 0;
  for (const auto &c : recipe.composition)
    n += c.count;
  return n;
}

} // namespace

void SpectrumScan::validate() const {
  if (frequency_grid.empty())
    throw ValidationError("spectrum scan: empty frequency grid");
  for (std::size_t i = 0; i < frequency_grid.size(); ++i) {
    if (!(frequency_grid[i] > 0.0))
      throw ValidationError("spectrum scan: frequencies must be positive");
    if (i > 0 && !(frequency_grid[i] > frequency_grid[i - 1]))
      throw ValidationError("spectrum scan: frequency grid must be strictly increasing");
  }
  if (!(dwell > 0.0))
    throw ValidationError("spectrum scan: dwell must be > 0");
  if (!(tickle_amplitude >= 0.0))
    throw ValidationError("spectrum scan: tickle amplitude must be >= 0");
  if (!(equilibration_time >= 0.0))
    throw ValidationError("spectrum scan: equilibration time must be >= 0");
  if (control_runs < 1)
    throw ValidationError("spectrum scan: need at least one control run");
  if (recipe_size(cloud) == 0)
    throw ValidationError("spectrum scan: cloud recipe holds no ions");
}

std::vector<double> frequency_grid(double start, double stop, double step) {
  if (!(start > 0.0) || !(step > 0.0) || !(stop >= start))
    throw ValidationError("frequency_grid: need 0 < start <= stop and step > 0");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = start + step * static_cast<double>(i);
  return grid;
}

std::uint64_t realize(const SpectrumScan &scan, const MeasurementSetup &setup,
                      double tickle_frequency, double tickle_amplitude, std::uint64_t seed) {
  auto cloud = dynamics::synthesize_cloud(scan.cloud, setup.geometry, setup.drive, seed);
  if (cloud.size() == 0)
    throw UnstableParameters("spectrum scan: no species of the recipe is trappable");
  dynamics::Integrator integrator(make_context(setup, cloud));
  integrator.equilibrate(cloud, scan.equilibration_time);
  if (tickle_amplitude > 0.0) {
    dynamics::TickleDrive tickle;
    tickle.frequency = tickle_frequency;
    tickle.amplitude = tickle_amplitude;
    tickle.duration = scan.dwell;
    tickle.start_time = cloud.time;
    integrator.set_tickle(tickle);
  }
  integrator.equilibrate(cloud, scan.dwell);
  return dynamics::eject_and_count(cloud, setup.ejection, setup.geometry);
}

SpectrumResult run_mass_spectrum(const SpectrumScan &scan, const MeasurementSetup &setup) {
  scan.validate();
  setup.ejection.validate();
  const unsigned threads = resolve_threads(scan.threads);

  SpectrumResult result;
  result.control_counts.resize(scan.control_runs);
  // The synthesized size can be below the recipe size when a species is
  // outside the stability region.
  const std::size_t synthesized =
      dynamics::synthesize_cloud(scan.cloud, setup.geometry, setup.drive, 0).size();
  parallel_for(scan.control_runs, threads, [&](std::size_t c) {
    result.control_counts[c] =
        realize(scan, setup, scan.frequency_grid.front(), 0.0,
                derive_seed(scan.master_seed, control_stream, c));
  });
  const double expected = static_cast<double>(synthesized) * setup.ejection.detection_efficiency;
  for (std::size_t c = 0; c < scan.control_runs; ++c)
    if (static_cast<double>(result.control_counts[c]) < 0.9 * expected)
      throw ControlRunFailure("control run " + std::to_string(c) + " kept " +
                              std::to_string(result.control_counts[c]) + " of " +
                              std::to_string(synthesized) + " ions");
  const double mean_control =
      std::accumulate(result.control_counts.begin(), result.control_counts.end(), 0.0) /
      static_cast<double>(scan.control_runs);
  const auto baseline = static_cast<std::uint64_t>(std::llround(mean_control));
  if (baseline == 0)
    throw ControlRunFailure("control runs detected no ions");

  result.points.resize(scan.frequency_grid.size());
  parallel_for(scan.frequency_grid.size(), threads, [&](std::size_t i) {
    const double f = scan.frequency_grid[i];
    const auto counted = realize(scan, setup, f, scan.tickle_amplitude,
                                 derive_seed(scan.master_seed, point_stream, i));
    result.points[i] = {f, static_cast<double>(counted) / static_cast<double>(baseline),
                        counted, baseline};
  });
  return result;
}

std::vector<double> analytic_resonances(const trap::IonSpecies &species,
                                        const trap::DriveSettings &drive,
                                        const trap::TrapGeometry &geometry,
                                        int max_subharmonic) {
  if (max_subharmonic < 1)
    throw ValidationError("analytic_resonances: max_subharmonic must be >= 1");
  const double nu_r =
      trap::exact_radial_frequency(trap::mathieu_params(geometry, drive, species), drive);
  std::vector<double> out;
  for (int n = 1; n <= max_subharmonic; ++n)
    out.push_back(2.0 * nu_r / n);
  return out;
}

double contrast(const SpectrumResult &result, double peak_center, double window) {
  if (!(window > 0.0))
    throw ValidationError("contrast: window must be positive");
  const auto &pts = result.points;
  if (pts.empty())
    throw ValidationError("contrast: empty spectrum");
  const double lo = peak_center - 0.5 * window;
  const double hi = peak_center + 0.5 * window;
  if (lo < pts.front().frequency || hi > pts.back().frequency)
    throw ValidationError("contrast: window lies outside the frequency grid");

  double minimum = INFINITY;
  std::size_t inside = 0;
  std::vector<double> local;
  for (const auto &p : pts) {
    if (p.frequency >= lo && p.frequency <= hi) {
      minimum = std::min(minimum, p.survival_fraction);
      ++inside;
    }
    if (std::abs(p.frequency - peak_center) <= 2.0 * window)
      local.push_back(p.survival_fraction);
  }
  if (inside < 3)
    throw ValidationError("contrast: window holds fewer than 3 grid points");

  std::sort(local.begin(), local.end(), std::greater<>());
  const std::size_t top = std::max<std::size_t>(1, local.size() / 3);
  const double baseline = std::accumulate(local.begin(), local.begin() + top, 0.0) / top;
  if (!(baseline > 0.0))
    return 0.0;
  return std::clamp(100.0 * (1.0 - minimum / baseline), 0.0, 100.0);
}

double depletion_minimum(const SpectrumResult &result, double lo, double hi) {
  double minimum = INFINITY;
  for (const auto &p : result.points)
    if (p.frequency >= lo && p.frequency <= hi)
      minimum = std::min(minimum, p.survival_fraction);
  if (!std::isfinite(minimum))
    throw ValidationError("depletion_minimum: no grid point in range");
  double first = 0.0, last = 0.0;
  bool found = false;
  for (const auto &p : result.points)
    if (p.frequency >= lo && p.frequency <= hi && p.survival_fraction == minimum) {
      if (!found)
        first = p.frequency;
      last = p.frequency;
      found = true;
    }
  return 0.5 * (first + last);
}

double mass_from_peak(double peak_frequency, const trap::DriveSettings &drive,
                      const trap::TrapGeometry &geometry, int subharmonic_n, double charge) {
  if (!(peak_frequency > 0.0))
    throw ValidationError("mass_from_peak: peak frequency must be positive");
  if (subharmonic_n < 1)
    throw ValidationError("mass_from_peak: subharmonic order must be >= 1");
  const double target = 0.5 * subharmonic_n * peak_frequency; // nu_R

  trap::IonSpecies probe{"probe", units::atomic_mass_unit, charge, false};
  // nu_R(m); zero once the radial motion is no longer confined.
  auto nu_of = [&](double m) {
    probe.mass = m;
    const auto p = trap::mathieu_params(geometry, drive, probe);
    if (!(p.a_radial + 0.5 * p.q_radial * p.q_radial > 0.0))
      return 0.0;
    return trap::exact_radial_frequency(p, drive);
  };

  // q scales as 1/m: the lightest trappable mass sits at the q limit.
  const double q_unit = trap::mathieu_params(geometry, drive, probe).q_radial;
  double m_lo = units::atomic_mass_unit * q_unit / trap::first_region_q_limit * (1.0 + 1e-9);
  if (target >= nu_of(m_lo))
    throw UnstableParameters("mass_from_peak: no trappable mass has this resonance");
  double m_hi = 2.0 * m_lo;
  while (nu_of(m_hi) > target) {
    m_hi *= 2.0;
    if (m_hi > 1e12 * m_lo)
      throw UnstableParameters("mass_from_peak: resonance below the trappable range");
  }
  for (int it = 0; it < 300 && (m_hi - m_lo) > 1e-15 * m_hi; ++it) {
    const double mid = 0.5 * (m_lo + m_hi);
    (nu_of(mid) > target ? m_lo : m_hi) = mid;
  }
  return 0.5 * (m_lo + m_hi);
}

PeakReport find_peaks(const SpectrumResult &result, double min_contrast, double satellite_window) {
  if (!(min_contrast > 0.0 && min_contrast < 100.0))
    throw ValidationError("find_peaks: min_contrast must lie in (0, 100)");
  const double threshold = 1.0 - min_contrast / 100.0;
  const auto &pts = result.points;
  const double step = pts.size() > 1 ? pts[1].frequency - pts[0].frequency : 0.0;

  PeakReport report;
  std::size_t i = 0;
  while (i < pts.size()) {
    if (pts[i].survival_fraction >= threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double weight = 0.0, moment = 0.0, minimum = INFINITY;
    while (j < pts.size() && pts[j].survival_fraction < threshold) {
      const double depth = 1.0 - std::min(1.0, pts[j].survival_fraction);
      weight += depth;
      moment += depth * pts[j].frequency;
      minimum = std::min(minimum, pts[j].survival_fraction);
      ++j;
    }
    Peak peak;
    peak.center = weight > 0.0 ? moment / weight : pts[i].frequency;
    peak.contrast = std::clamp(100.0 * (1.0 - minimum), 0.0, 100.0);
    peak.width = pts[j - 1].frequency - pts[i].frequency + step;
    report.peaks.push_back(peak);
    i = j;
  }

  if (!report.peaks.empty()) {
    const auto deepest = std::max_element(
        report.peaks.begin(), report.peaks.end(),
        [](const Peak &a, const Peak &b) { return a.contrast < b.contrast; });
    for (auto it = report.peaks.begin(); it != report.peaks.end(); ++it)
      if (it != deepest && std::abs(it->center - deepest->center) <= satellite_window)
        report.satellites.push_back(it->center - deepest->center);
  }
  return report;
}

Profile position_profile(std::span<const double> coordinates, int bins) {
  if (coordinates.size() < 10)
    throw ValidationError("cloud_profile: need at least 10 ions, got " +
                          std::to_string(coordinates.size()));
  if (bins < 1)
    throw ValidationError("cloud_profile: bins must be >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(coordinates.begin(), coordinates.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi - lo <= 0.0) {
    lo -= 0.5e-9;
    hi += 0.5e-9;
  }
  Profile profile;
  profile.lower = lo;
  profile.bin_width = (hi - lo) / bins;
  profile.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const double c : coordinates) {
    auto b = static_cast<std::ptrdiff_t>((c - lo) / profile.bin_width);
    b = std::clamp<std::ptrdiff_t>(b, 0, bins - 1);
    ++profile.counts[static_cast<std::size_t>(b)];
  }

  const auto &h = profile.counts;
  const double half = 0.5 * static_cast<double>(*std::max_element(h.begin(), h.end()));
  auto center = [&](std::ptrdiff_t b) { return lo + (static_cast<double>(b) + 0.5) * profile.bin_width; };
  auto count = [&](std::ptrdiff_t b) {
    return b < 0 || b >= bins ? 0.0 : static_cast<double>(h[static_cast<std::size_t>(b)]);
  };
  std::ptrdiff_t first = 0, last = bins - 1;
  while (count(first) < half)
    ++first;
  while (count(last) < half)
    --last;
  // Crossing between the bin below half and the first bin at or above it.
  const double left = center(first - 1) + profile.bin_width * (half - count(first - 1)) /
                                              (count(first) - count(first - 1));
  const double right = center(last) + profile.bin_width * (count(last) - half) /
                                          (count(last) - count(last + 1));
  profile.fwhm = right - left;
  return profile;
}

Profile cloud_profile(const dynamics::CloudState &state, Axis axis, int bins) {
  const auto &coords = axis == Axis::x ? state.x : axis == Axis::y ? state.y : state.z;
  return position_profile(coords, bins);
}

void write_spectrum_csv(std::ostream &out, const SpectrumResult &result) {
  out << "frequency_hz,survival_fraction,counted,baseline\n";
  char buf[128];
  for (const auto &p : result.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%llu,%llu\n", p.frequency, p.survival_fraction,
                  static_cast<unsigned long long>(p.counted),
                  static_cast<unsigned long long>(p.baseline));
    out << buf;
  }
}

} // namespace paultrap::spectrometry
