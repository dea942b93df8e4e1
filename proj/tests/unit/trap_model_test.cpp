#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "paultrap/errors.hpp"
#include "paultrap/trap_model.hpp"
#include "paultrap/units.hpp"

using namespace paultrap;
using namespace paultrap::trap;

namespace {

constexpr double omega_rf = units::two_pi * 2.5e6;

TrapGeometry reference_geometry() {
  TrapGeometry g;
  g.r0 = 3.2e-3;
  g.z0 = 10e-3;
  return g;
}

DriveSettings drive(double v_rf, double v_ec = 500.0) { return {omega_rf, v_rf, v_ec}; }

TrapGeometry calibrated() {
  auto g = reference_geometry();
  g.kappa_axial = calibrate_kappa(20e3, g, drive(500.0), strontium88());
  return g;
}

} // namespace

TEST_SUITE("trap_model") {

TEST_CASE("mathieu parameters follow the potential convention") {
  const auto g = reference_geometry();
  const auto p = mathieu_params(g, drive(500.0), strontium88());
  CHECK(p.q_radial == doctest::Approx(oracle::q_radial(500.0, 88.0, 3.2e-3, omega_rf)).epsilon(1e-12));
  const double a_axial = 8.0 * g.kappa_axial * oracle::e_charge * 500.0 /
                         (88.0 * oracle::amu * g.z0 * g.z0 * omega_rf * omega_rf);
  CHECK(p.a_axial == doctest::Approx(a_axial).epsilon(1e-12));
  CHECK(p.a_radial == doctest::Approx(-0.5 * a_axial).epsilon(1e-12));
}

TEST_CASE("eta_rf scales q linearly") {
  auto g = reference_geometry();
  const double q1 = mathieu_params(g, drive(300.0), strontium88()).q_radial;
  g.eta_rf = 0.8;
  CHECK(mathieu_params(g, drive(300.0), strontium88()).q_radial == doctest::Approx(0.8 * q1));
}

TEST_CASE("stability region bounds") {
  CHECK(stability_check({0.43, -1e-4, 2e-4}).stable);
  CHECK(stability_check({0.43, -1e-4, 2e-4}).margin > 0.0);

  SUBCASE("q above the first-region limit") {
    const auto r = stability_check({0.95, -1e-4, 2e-4});
    CHECK_FALSE(r.stable);
    CHECK(r.margin == doctest::Approx(0.908 - 0.95));
  }
  SUBCASE("end caps defocus faster than the RF confines") {
    const auto r = stability_check({0.01, -1e-3, 2e-3});
    CHECK_FALSE(r.stable);
    CHECK(r.margin < 0.0);
  }
  SUBCASE("negative axial a gives no axial well") {
    CHECK_FALSE(stability_check({0.3, 1e-4, -2e-4}).stable);
  }
}

TEST_CASE("lowest-order secular frequencies at the reference drive [PAPER]") {
  const auto g = calibrated();
  const auto d = drive(500.0);
  const auto nu = secular_frequencies(mathieu_params(g, d, strontium88()), d);
  // typical radial secular frequency 400 kHz; axial 20 kHz by calibration
  CHECK(nu.nu_radial >= 380e3);
  CHECK(nu.nu_radial <= 420e3);
  CHECK(nu.nu_axial == doctest::Approx(20e3).epsilon(1e-12));
}

TEST_CASE("kappa calibration [DERIVED]") {
  CHECK(calibrated().kappa_axial == doctest::Approx(1.4402606786046671e-3).epsilon(1e-12));
  CHECK_THROWS_AS(calibrate_kappa(0.0, reference_geometry(), drive(500.0), strontium88()),
                  ValidationError);
  CHECK_THROWS_AS(calibrate_kappa(20e3, reference_geometry(), drive(500.0, 0.0), strontium88()),
                  ValidationError);
}

TEST_CASE("characteristic exponent matches the Floquet oracle") {
  for (const double q : {0.05, 0.2, 0.43, 0.6, 0.8}) {
    for (const double a : {0.0, -1e-3, 2e-3}) {
      if (a + 0.5 * q * q <= 0.0)
        continue;
      CAPTURE(q);
      CAPTURE(a);
      CHECK(mathieu_beta(a, q) == doctest::Approx(oracle::floquet_beta(a, q)).epsilon(1e-7));
    }
  }
}

TEST_CASE("exact radial frequency at the reference drive [DERIVED]") {
  const auto g = calibrated();
  const auto d = drive(500.0);
  const auto p = mathieu_params(g, d, strontium88());
  const double oracle_nu = oracle::floquet_beta(p.a_radial, p.q_radial) * omega_rf / (4.0 * oracle::pi);
  CHECK(exact_radial_frequency(p, d) == doctest::Approx(oracle_nu).epsilon(1e-8));
  CHECK(exact_radial_frequency(p, d) == doctest::Approx(399090.856).epsilon(1e-8));
  // the exact exponent exceeds the adiabatic estimate at finite q
  CHECK(exact_radial_frequency(p, d) > secular_frequencies(p, d).nu_radial);
}

TEST_CASE("unstable parameters are reported") {
  CHECK_THROWS_AS(secular_frequencies({0.95, 0.0, 0.0}, drive(500.0)), UnstableParameters);
  CHECK_THROWS_AS(mathieu_beta(-0.01, 0.1), UnstableParameters);
  CHECK_THROWS_AS(mathieu_beta(0.0, 0.95), UnstableParameters);
  CHECK_THROWS_AS(exact_radial_frequency({0.95, 0.0, 0.0}, drive(500.0)), UnstableParameters);
}

TEST_CASE("instantaneous force is minus the charge times the potential gradient") {
  const auto g = calibrated();
  const auto d = drive(400.0, 300.0);
  const auto s = strontium88();
  const double t = 0.37e-7;
  auto phi = [&](double x, double y, double z) {
    return g.eta_rf * d.v_rf * std::cos(d.omega_rf * t) * (x * x - y * y) / (2 * g.r0 * g.r0) +
           g.kappa_axial * d.v_ec * (z * z - 0.5 * (x * x + y * y)) / (g.z0 * g.z0);
  };
  const Vec3 r{0.4e-3, -0.7e-3, 2.1e-3};
  const double h = 1e-7;
  const auto f = instantaneous_force(r, t, g, d, s);
  CHECK(f.x == doctest::Approx(-s.charge * (phi(r.x + h, r.y, r.z) - phi(r.x - h, r.y, r.z)) / (2 * h)).epsilon(1e-6));
  CHECK(f.y == doctest::Approx(-s.charge * (phi(r.x, r.y + h, r.z) - phi(r.x, r.y - h, r.z)) / (2 * h)).epsilon(1e-6));
  CHECK(f.z == doctest::Approx(-s.charge * (phi(r.x, r.y, r.z + h) - phi(r.x, r.y, r.z - h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("pseudopotential force is the negative energy gradient") {
  const auto g = calibrated();
  const auto d = drive(250.0);
  const auto s = strontium88();
  const Vec3 r{0.3e-3, 0.5e-3, -1.5e-3};
  const double h = 1e-7;
  auto U = [&](Vec3 p) { return pseudopotential_energy(p, g, d, s); };
  const auto f = pseudopotential_force(r, g, d, s);
  CHECK(f.x == doctest::Approx(-(U(r + Vec3{h, 0, 0}) - U(r - Vec3{h, 0, 0})) / (2 * h)).epsilon(1e-6));
  CHECK(f.y == doctest::Approx(-(U(r + Vec3{0, h, 0}) - U(r - Vec3{0, h, 0})) / (2 * h)).epsilon(1e-6));
  CHECK(f.z == doctest::Approx(-(U(r + Vec3{0, 0, h}) - U(r - Vec3{0, 0, h})) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("pseudopotential curvature reproduces the secular frequencies") {
  const auto g = calibrated();
  const auto d = drive(500.0);
  const auto s = strontium88();
  const auto k = pseudopotential_curvature(g, d, s);
  const auto nu = secular_frequencies(mathieu_params(g, d, s), d);
  CHECK(std::sqrt(k.radial / s.mass) / units::two_pi == doctest::Approx(nu.nu_radial).epsilon(1e-10));
  CHECK(std::sqrt(k.axial / s.mass) / units::two_pi == doctest::Approx(nu.nu_axial).epsilon(1e-10));
}

TEST_CASE("rod DC offset splits the radial modes [DERIVED]") {
  const auto g = calibrated();
  auto d = drive(500.0);
  d.v_dc = 2.0;
  const auto s = strontium88();
  const auto p = mathieu_params(g, d, s);
  // Phi_dc = v_dc (x^2 - y^2) / (2 r0^2) enters like the RF term: a_split = 2 q v_dc / v_rf
  CHECK(p.a_split == doctest::Approx(2.0 * p.q_radial * d.v_dc / d.v_rf).epsilon(1e-12));
  CHECK(p.a_radial == mathieu_params(g, drive(500.0), s).a_radial);

  const double t = 0.11e-6;
  auto phi = [&](double x, double y, double z) {
    return (g.eta_rf * d.v_rf * std::cos(d.omega_rf * t) + d.v_dc) * (x * x - y * y) / (2 * g.r0 * g.r0) +
           g.kappa_axial * d.v_ec * (z * z - 0.5 * (x * x + y * y)) / (g.z0 * g.z0);
  };
  const Vec3 r{0.4e-3, -0.7e-3, 2.1e-3};
  const double h = 1e-7;
  const auto f = instantaneous_force(r, t, g, d, s);
  CHECK(f.x == doctest::Approx(-s.charge * (phi(r.x + h, r.y, r.z) - phi(r.x - h, r.y, r.z)) / (2 * h)).epsilon(1e-6));
  CHECK(f.y == doctest::Approx(-s.charge * (phi(r.x, r.y + h, r.z) - phi(r.x, r.y - h, r.z)) / (2 * h)).epsilon(1e-6));

  auto U = [&](Vec3 q) { return pseudopotential_energy(q, g, d, s); };
  const auto fp = pseudopotential_force(r, g, d, s);
  CHECK(fp.x == doctest::Approx(-(U(r + Vec3{h, 0, 0}) - U(r - Vec3{h, 0, 0})) / (2 * h)).epsilon(1e-6));
  CHECK(fp.y == doctest::Approx(-(U(r + Vec3{0, h, 0}) - U(r - Vec3{0, h, 0})) / (2 * h)).epsilon(1e-6));

  const auto k = pseudopotential_curvature(g, d, s);
  const double scale = d.omega_rf / (4 * oracle::pi);
  const double q2 = 0.5 * p.q_radial * p.q_radial;
  CHECK(std::sqrt((k.radial + k.split) / s.mass) / units::two_pi ==
        doctest::Approx(scale * std::sqrt(p.a_radial + p.a_split + q2)).epsilon(1e-10));
  CHECK(std::sqrt((k.radial - k.split) / s.mass) / units::two_pi ==
        doctest::Approx(scale * std::sqrt(p.a_radial - p.a_split + q2)).epsilon(1e-10));

  SUBCASE("the weaker direction decides stability") {
    auto weak = drive(100.0);
    CHECK(stability_check(mathieu_params(g, weak, s)).stable);
    weak.v_dc = -3.0;
    CHECK_FALSE(stability_check(mathieu_params(g, weak, s)).stable);
    weak.v_dc = std::nan("");
    CHECK_THROWS_AS(weak.validate(), ValidationError);
  }
}

TEST_CASE("field evaluations outside the region throw") {
  const auto g = reference_geometry();
  const Vec3 outside{3.3e-3, 0.0, 0.0};
  CHECK_FALSE(inside_region(outside, g));
  CHECK(inside_region({0, 0, 9.9e-3}, g));
  CHECK_THROWS_AS(instantaneous_force(outside, 0.0, g, drive(500.0), strontium88()), OutOfRegion);
  CHECK_THROWS_AS(pseudopotential_energy({0, 0, 10e-3}, g, drive(500.0), strontium88()), OutOfRegion);
  CHECK_THROWS_AS(pseudopotential_force(outside, g, drive(500.0), strontium88()), OutOfRegion);
}

TEST_CASE("trap volume matches the ellipsoid oracle") {
  const auto g = calibrated();
  const auto s = strontium88();
  for (const double v : {150.0, 400.0}) {
    const auto d = drive(v);
    // k_r, k_z from the lowest-order frequencies
    const double q = oracle::q_radial(v, 88.0, g.r0, omega_rf);
    const double a_z = 8 * g.kappa_axial * oracle::e_charge * d.v_ec /
                       (s.mass * g.z0 * g.z0 * omega_rf * omega_rf);
    const double w_r = 0.5 * omega_rf * std::sqrt(-0.5 * a_z + 0.5 * q * q);
    const double w_z = 0.5 * omega_rf * std::sqrt(a_z);
    const double k_r = s.mass * w_r * w_r, k_z = s.mass * w_z * w_z;
    const double depth = std::min(0.5 * k_r * g.r0 * g.r0, 0.5 * k_z * g.z0 * g.z0);
    const double rho = std::sqrt(2 * depth / k_r), zm = std::sqrt(2 * depth / k_z);
    const double ellipsoid = 4.0 / 3.0 * oracle::pi * rho * rho * zm;

    const auto est = trap_volume(g, d, s, {40e-6});
    CAPTURE(v);
    CHECK(est.depth == doctest::Approx(depth).epsilon(0.02));
    CHECK(est.volume == doctest::Approx(ellipsoid).epsilon(0.03));
  }
}

TEST_CASE("trap volume edge cases") {
  const auto g = calibrated();
  const auto s = strontium88();
  SUBCASE("zero when unstable") {
    const auto est = trap_volume(g, drive(1200.0), s, {80e-6});
    CHECK(est.volume == 0.0);
    CHECK(est.depth == 0.0);
  }
  SUBCASE("resolution must be fine enough") {
    CHECK_THROWS_AS(trap_volume(g, drive(300.0), s, {g.r0 / 10}), ValidationError);
    CHECK_THROWS_AS(trap_volume(g, drive(300.0), s, {0.0}), ValidationError);
  }
  SUBCASE("deterministic") {
    const auto a = trap_volume(g, drive(300.0), s, {80e-6});
    const auto b = trap_volume(g, drive(300.0), s, {80e-6});
    CHECK(a.volume == b.volume);
    CHECK(a.depth == b.depth);
  }
}

TEST_CASE("trap volume maximum over the sweep [DERIVED]") {
  // Idealized quadrupole: the volume peaks where radial and axial depth
  // limits cross, well below the field-solver optimum.
  const auto g = calibrated();
  double best_v = 0.0, best = 0.0;
  for (double v = 50.0; v <= 500.0; v += 5.0) {
    const double vol = trap_volume(g, drive(v), strontium88(), {80e-6}).volume;
    if (vol > best) {
      best = vol;
      best_v = v;
    }
  }
  // radial and axial depths of the ellipsoid oracle cross at 83.53 V
  const double q_cross = oracle::q_radial(83.53, 88.0, g.r0, omega_rf);
  const double a_z = 8 * g.kappa_axial * oracle::e_charge * 500.0 /
                     (88.0 * oracle::amu * g.z0 * g.z0 * omega_rf * omega_rf);
  CHECK((0.5 * q_cross * q_cross - 0.5 * a_z) * g.r0 * g.r0 == doctest::Approx(a_z * g.z0 * g.z0).epsilon(1e-3));
  CHECK(std::abs(best_v - 83.53) <= 5.0);
  CHECK(best_v == doctest::Approx(85.0));
}

TEST_CASE("validation of inputs") {
  TrapGeometry g;
  g.r0 = 0.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g = reference_geometry();
  g.kappa_axial = 1.5;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  CHECK_THROWS_AS((DriveSettings{0.0, 1.0, 1.0}.validate()), ValidationError);
  CHECK_THROWS_AS((DriveSettings{1.0, -1.0, 1.0}.validate()), ValidationError);
  IonSpecies s = strontium88();
  s.mass = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

}
