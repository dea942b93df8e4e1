#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "paultrap/errors.hpp"
#include "paultrap/fit.hpp"
#include "paultrap/loading.hpp"
#include "paultrap/units.hpp"

using namespace paultrap;
using namespace paultrap::loading;

namespace {

PhotoionBeam calibrated_beam() {
  PhotoionBeam b;
  b.rate_coefficient = 1.91e-20;
  return b;
}

double gaussian(double t, double fwhm) { return std::exp(-4.0 * std::log(2.0) * t * t / (fwhm * fwhm)); }

double sech2(double t, double fwhm) {
  const double T = fwhm / (2.0 * std::acosh(std::sqrt(2.0)));
  const double s = 1.0 / std::cosh(t / T);
  return s * s;
}

} // namespace

TEST_SUITE("loading") {

TEST_CASE("envelope duties against numerical integration") {
  PhotoionBeam b;
  const double tau = b.pulse_duration_fwhm;
  const double span = 20 * tau;
  SUBCASE("gaussian") {
    b.shape = PulseShape::gaussian;
    const double i1 = oracle::simpson([&](double t) { return gaussian(t, tau); }, -span, span);
    const double i2 = oracle::simpson([&](double t) { return std::pow(gaussian(t, tau), 2); }, -span, span);
    CHECK(envelope_duty(b) == doctest::Approx(b.rep_rate * i1).epsilon(1e-9));
    CHECK(squared_envelope_duty(b) == doctest::Approx(b.rep_rate * i2).epsilon(1e-9));
    CHECK(shape_factor(b.shape) == doctest::Approx(tau / i1).epsilon(1e-9));
  }
  SUBCASE("sech2") {
    b.shape = PulseShape::sech2;
    const double i1 = oracle::simpson([&](double t) { return sech2(t, tau); }, -span, span);
    const double i2 = oracle::simpson([&](double t) { return std::pow(sech2(t, tau), 2); }, -span, span);
    CHECK(envelope_duty(b) == doctest::Approx(b.rep_rate * i1).epsilon(1e-9));
    CHECK(squared_envelope_duty(b) == doctest::Approx(b.rep_rate * i2).epsilon(1e-9));
    CHECK(sech2(tau / 2, tau) == doctest::Approx(0.5));
  }
}

TEST_CASE("peak intensity of the focused pulse [PAPER]") {
  PhotoionBeam b;
  const double peak_power = b.pulse_energy * shape_factor(b.shape) / b.pulse_duration_fwhm;
  const double oracle_i = 2.0 * peak_power / (oracle::pi * b.waist * b.waist) * 1e-4;
  CHECK(peak_intensity(b) == doctest::Approx(oracle_i).epsilon(1e-12));
  // quoted as ~1 GW/cm^2 for the 20 um waist
  CHECK(peak_intensity(b) > 1e9 / 3.0);
  CHECK(peak_intensity(b) < 1e9 * 3.0);
}

TEST_CASE("two-photon rate is quadratic in average power") {
  const auto b = calibrated_beam();
  const double n = 2e11;
  const double r1 = two_photon_rate(at_average_power(b, 5e-3), n);
  const double r2 = two_photon_rate(at_average_power(b, 10e-3), n);
  CHECK(r2 / r1 == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(two_photon_rate(b, 2 * n) == doctest::Approx(2 * two_photon_rate(b, n)));
  CHECK_THROWS_AS(two_photon_rate(b, -1.0), ValidationError);
  CHECK_THROWS_AS(at_average_power(b, 0.0), ValidationError);
}

TEST_CASE("pulsed versus cw enhancement [DERIVED]") {
  // <I^2> / <I>^2 for a 50 fs gaussian at 100 MHz, from the Simpson oracle
  const auto b = calibrated_beam();
  const double tau = b.pulse_duration_fwhm;
  const double i1 = b.rep_rate * oracle::simpson([&](double t) { return gaussian(t, tau); }, -20 * tau, 20 * tau);
  const double i2 = b.rep_rate * oracle::simpson([&](double t) { return std::pow(gaussian(t, tau), 2); }, -20 * tau, 20 * tau);
  const double ratio = two_photon_rate(b, 1e11) / cw_two_photon_rate(b, 1e11);
  CHECK(ratio == doctest::Approx(i2 / (i1 * i1)).epsilon(1e-9));
  CHECK(ratio == doctest::Approx(1.32856e5).epsilon(1e-5));
}

TEST_CASE("rate coefficient calibration round-trips") {
  PhotoionBeam b;
  const double n = oven_density(OvenSource{});
  b.rate_coefficient = calibrate_rate_coefficient(b, n, 3000.0);
  CHECK(two_photon_rate(b, n) == doctest::Approx(3000.0).epsilon(1e-12));
  CHECK(b.rate_coefficient == doctest::Approx(1.90988e-20).epsilon(1e-5));
  CHECK_THROWS_AS(calibrate_rate_coefficient(b, 0.0, 1.0), ValidationError);
}

TEST_CASE("beam validation") {
  PhotoionBeam b;
  b.waist = 0.0;
  CHECK_THROWS_AS(b.validate(), ValidationError);
  b = {};
  b.pulse_duration_fwhm = 1e-7; // longer than the repetition period
  CHECK_THROWS_AS(b.validate(), ValidationError);
  b = {};
  b.rate_coefficient = -1.0;
  CHECK_THROWS_AS(b.validate(), ValidationError);
}

TEST_CASE("oven temperature map and vapour pressure") {
  OvenSource o;
  CHECK(oven_temperature(o) == doctest::Approx(413.15));
  const double p = 100.0 * std::pow(10.0, 2.772 - 5659.7 / 413.15);
  CHECK(oven_pressure(o) == doctest::Approx(p).epsilon(1e-12));
  CHECK(oven_density(o) == doctest::Approx(p / (oracle::kB * 413.15)).epsilon(1e-12));
  o.current = 1.2;
  const double hotter = oven_density(o);
  o.current = 0.8;
  CHECK(hotter > 10 * oven_density(o));
  o.current = 1.4;
  CHECK_THROWS_AS(oven_density(o), ValidationError);
  o.current = 1.0;
  o.calibration_current_high = 0.7;
  CHECK_THROWS_AS(oven_temperature(o), ValidationError);
}

TEST_CASE("electron-bombardment composition") {
  EBSource eb;
  const auto comp = eb_composition(eb, trap::strontium88());
  REQUIRE(comp.size() == 5);
  CHECK(comp[0].weight == doctest::Approx(0.66));
  double total = 0.0;
  for (const auto &w : comp)
    total += w.weight;
  CHECK(total == doctest::Approx(1.0));
  CHECK(comp[4].species.mass == doctest::Approx(104 * units::atomic_mass_unit));
  CHECK_FALSE(comp[1].species.laser_cooled);

  eb.impurity_fraction = 0.0;
  CHECK(eb_composition(eb, trap::strontium88()).size() == 1);
  eb.impurity_fraction = 1.2;
  CHECK_THROWS_AS(eb.validate(), ValidationError);
  eb.impurity_fraction = 0.3;
  eb.impurity_species[0].weight = 0.9;
  CHECK_THROWS_AS(eb.validate(), ValidationError);
}

TEST_CASE("loading curve matches the integrated rate equation") {
  const LoadingModel m{3000.0, 42857.0, 0.005};
  const std::vector<double> t{0.0, 1.0, 10.0, 40.0, 120.0};
  const auto n = loading_curve(m, t);
  CHECK(n[0] == 0.0);
  for (std::size_t i = 1; i < t.size(); ++i)
    CHECK(n[i] == doctest::Approx(oracle::loading_rk4(3000.0, 42857.0, 0.005, t[i])).epsilon(1e-9));
  for (std::size_t i = 1; i < t.size(); ++i)
    CHECK(n[i] > n[i - 1]);
  CHECK(n.back() < m.saturation());
}

TEST_CASE("saturation and relaxation") {
  const LoadingModel m{3000.0, 42857.0, 0.005};
  const double k = 3000.0 / 42857.0 + 0.005;
  CHECK(m.relaxation_rate() == doctest::Approx(k));
  CHECK(m.saturation() == doctest::Approx(3000.0 / k));
  const double t95 = time_to_fraction(m, 0.95);
  const double at = loading_curve(m, std::vector<double>{t95})[0];
  CHECK(at == doctest::Approx(0.95 * m.saturation()).epsilon(1e-12));
  CHECK_THROWS_AS(time_to_fraction(m, 1.0), ValidationError);

  SUBCASE("unbounded linear loading") {
    const LoadingModel lin{100.0, std::numeric_limits<double>::infinity(), 0.0};
    CHECK(loading_curve(lin, std::vector<double>{2.0})[0] == doctest::Approx(200.0));
    CHECK(std::isinf(lin.saturation()));
    CHECK_THROWS_AS(time_to_fraction(lin, 0.5), ValidationError);
  }
  SUBCASE("invalid models") {
    CHECK_THROWS_AS((LoadingModel{1.0, 0.0, 0.0}.validate()), ValidationError);
    CHECK_THROWS_AS((LoadingModel{-1.0, 10.0, 0.0}.validate()), ValidationError);
    CHECK_THROWS_AS(loading_curve(m, std::vector<double>{-1.0}), ValidationError);
  }
}

TEST_CASE("capacity from the cold-fluid density") {
  trap::TrapGeometry g;
  const trap::DriveSettings d{units::two_pi * 2.5e6, 200.0, 500.0};
  const auto sr = trap::strontium88();
  const auto nu = trap::secular_frequencies(trap::mathieu_params(g, d, sr), d);
  const double w_r = units::two_pi * nu.nu_radial, w_a = units::two_pi * nu.nu_axial;
  const double n0 = oracle::eps0 * sr.mass * (2 * w_r * w_r + w_a * w_a) / (sr.charge * sr.charge);
  CHECK(cold_fluid_density(nu, sr) == doctest::Approx(n0).epsilon(1e-12));
  const trap::VolumeEstimate v{1e-7, 1e-20, 80e-6};
  CHECK(capacity(d, g, sr, v, 0.5) == doctest::Approx(0.5 * n0 * 1e-7).epsilon(1e-12));
  CHECK_THROWS_AS(capacity(d, g, sr, v, -1.0), ValidationError);
  const trap::DriveSettings unstable{units::two_pi * 2.5e6, 1200.0, 500.0};
  CHECK_THROWS_AS(capacity(unstable, g, sr, v), UnstableParameters);
}

TEST_CASE("capacity scale calibration hits the target peak") {
  const std::vector<double> caps{1e6, 7e6, 3e6, 0.0};
  const double scale = calibrate_capacity_scale(caps, 3000.0, 0.005, 4e4);
  const LoadingModel peak{3000.0, scale * 7e6, 0.005};
  CHECK(peak.saturation() == doctest::Approx(4e4).epsilon(1e-12));
  CHECK(LoadingModel{3000.0, scale * 3e6, 0.005}.saturation() < 4e4);
  CHECK_THROWS_AS(calibrate_capacity_scale(caps, 100.0, 0.005, 4e4), ValidationError);
  CHECK_THROWS_AS(calibrate_capacity_scale(std::vector<double>{0.0}, 3000.0, 0.0, 4e4), ValidationError);
  CHECK_THROWS_AS(calibrate_capacity_scale(std::vector<double>{}, 3000.0, 0.0, 4e4), ValidationError);
}

TEST_CASE("least-squares line") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  const std::vector<double> y{1.0, 3.1, 4.9, 7.2, 8.8};
  const auto f = fit_line(x, y);
  // closed-form OLS
  CHECK(f.slope == doctest::Approx(1.97).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(1.06).epsilon(1e-12));
  CHECK(f.slope_error > 0.0);
  const std::vector<double> same{2, 2, 2};
  CHECK_THROWS_AS(fit_line(same, same), DegenerateFit);
}

TEST_CASE("simulated rate scan recovers the quadratic law") {
  const auto b = calibrated_beam();
  const double n = oven_density(OvenSource{});
  const std::vector<double> powers{3e-3, 5e-3, 7e-3, 9e-3, 11e-3, 13e-3, 15e-3};
  RateScanOptions opt;
  opt.seed = 42;
  SUBCASE("noiseless is exact") {
    opt.counting_noise = false;
    opt.trials = 1;
    const auto r = rate_scan(b, n, powers, opt);
    CHECK(r.exponent == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("with counting noise") {
    const auto r = rate_scan(b, n, powers, opt);
    CHECK(std::abs(r.exponent - 2.0) < 0.05);
    REQUIRE(r.points.size() == powers.size());
    CHECK(r.points.back().rate == doctest::Approx(3000.0).epsilon(0.05));
    CHECK(r.points.back().error > 0.0);
  }
  SUBCASE("thread count does not change the result") {
    const auto a = rate_scan(b, n, powers, opt);
    opt.threads = 3;
    const auto c = rate_scan(b, n, powers, opt);
    CHECK(a.exponent == c.exponent);
    CHECK(a.log_prefactor == c.log_prefactor);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(rate_scan(b, n, std::vector<double>{1e-3, 2e-3, 3e-3}, opt), ValidationError);
    CHECK_THROWS_AS(rate_scan(b, n, std::vector<double>{1e-3, 2e-3, -3e-3, 4e-3}, opt), ValidationError);
    PhotoionBeam dark = b;
    dark.rate_coefficient = 0.0;
    CHECK_THROWS_AS(rate_scan(dark, n, powers, opt), DegenerateFit);
    opt.window_points = 1;
    CHECK_THROWS_AS(rate_scan(b, n, powers, opt), ValidationError);
  }
}

}
