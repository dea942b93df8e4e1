#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "paultrap/coulomb.hpp"
#include "paultrap/errors.hpp"

using namespace paultrap;
using namespace paultrap::dynamics;

namespace {

struct Cloud {
  std::vector<double> x, y, z, q;
  ParticleView view() const { return {x, y, z, q}; }
};

Cloud random_cloud(std::size_t n, std::uint64_t seed, double spread = 100e-6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, spread);
  Cloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.x.push_back(d(rng));
    c.y.push_back(d(rng));
    c.z.push_back(3.0 * d(rng));
    c.q.push_back((i % 3 == 0 ? 2.0 : 1.0) * oracle::e_charge);
  }
  return c;
}

double max_relative_error(const Cloud &c, const FieldOptions &opt, double eps) {
  const std::size_t n = c.x.size();
  std::vector<double> ex(n), ey(n), ez(n);
  coulomb_field(c.view(), opt, ex, ey, ez);
  const auto ref = oracle::coulomb_field(c.x, c.y, c.z, c.q, eps);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = std::hypot(ref[i][0], ref[i][1], ref[i][2]);
    const double err = std::hypot(ex[i] - ref[i][0], ey[i] - ref[i][1], ez[i] - ref[i][2]);
    worst = std::max(worst, err / mag);
  }
  return worst;
}

} // namespace

TEST_SUITE("coulomb") {

TEST_CASE("every mode agrees with the long-double oracle") {
  const auto c = random_cloud(100, 11);
  const double eps = 100e-9;
  SUBCASE("direct rows") {
    CHECK(max_relative_error(c, {CoulombMode::direct, eps, true, 1}, eps) < 1e-10);
  }
  SUBCASE("direct pairs, threaded") {
    CHECK(max_relative_error(c, {CoulombMode::direct, eps, false, 3}, eps) < 1e-10);
  }
  SUBCASE("cell list") {
    CHECK(max_relative_error(c, {CoulombMode::cell_list, eps, true, 2}, eps) < 1e-10);
  }
  SUBCASE("unsoftened") {
    CHECK(max_relative_error(c, {CoulombMode::direct, 0.0, true, 1}, 0.0) < 1e-10);
  }
}

TEST_CASE("cell list handles degenerate and flat clouds") {
  Cloud line;
  for (int i = 0; i < 40; ++i) {
    line.x.push_back(0.0);
    line.y.push_back(0.0);
    line.z.push_back(i * 5e-6);
    line.q.push_back(oracle::e_charge);
  }
  CHECK(max_relative_error(line, {CoulombMode::cell_list, 1e-9, true, 1}, 1e-9) < 1e-10);
}

TEST_CASE("row ownership is bit-identical across thread counts") {
  const auto c = random_cloud(257, 3);
  const std::size_t n = c.x.size();
  std::vector<double> a(n), b(n), cz(n), a4(n), b4(n), c4(n);
  coulomb_field(c.view(), {CoulombMode::direct, 1e-7, true, 1}, a, b, cz);
  coulomb_field(c.view(), {CoulombMode::direct, 1e-7, true, 4}, a4, b4, c4);
  CHECK(a == a4);
  CHECK(b == b4);
  CHECK(cz == c4);
}

TEST_CASE("two charges obey Coulomb's law") {
  const Cloud c{{0.0, 20e-6}, {0.0, 0.0}, {0.0, 0.0}, {oracle::e_charge, oracle::e_charge}};
  std::vector<double> ex(2), ey(2), ez(2);
  coulomb_field(c.view(), {CoulombMode::direct, 0.0, true, 1}, ex, ey, ez);
  const double expected = oracle::e_charge / (4 * oracle::pi * oracle::eps0 * 400e-12);
  CHECK(ex[1] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(ex[0] == doctest::Approx(-expected).epsilon(1e-12));
  CHECK(ey[0] == 0.0);
}

TEST_CASE("mode off gives a zero field") {
  const auto c = random_cloud(10, 1);
  std::vector<double> ex(10, 1.0), ey(10, 1.0), ez(10, 1.0);
  coulomb_field(c.view(), {CoulombMode::off, 1e-7, true, 1}, ex, ey, ez);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(ex[i] == 0.0);
}

TEST_CASE("pair energy matches the oracle") {
  const auto c = random_cloud(50, 5);
  const double eps = 100e-9;
  long double ref = 0.0L;
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = i + 1; j < 50; ++j) {
      const long double dx = c.x[i] - c.x[j], dy = c.y[i] - c.y[j], dz = c.z[i] - c.z[j];
      ref += c.q[i] * c.q[j] / std::sqrt(dx * dx + dy * dy + dz * dz + eps * eps);
    }
  ref /= 4.0L * std::numbers::pi_v<long double> * oracle::eps0;
  CHECK(coulomb_energy(c.view(), eps) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
}

TEST_CASE("invalid inputs") {
  const auto c = random_cloud(4, 1);
  std::vector<double> ex(3), ey(4), ez(4);
  CHECK_THROWS_AS(coulomb_field(c.view(), {}, ex, ey, ez), ValidationError);
  std::vector<double> fx(4);
  CHECK_THROWS_AS(coulomb_field(c.view(), {CoulombMode::direct, -1.0, true, 1}, fx, ey, ez),
                  ValidationError);
}

TEST_CASE("empty and single-particle clouds") {
  Cloud empty;
  std::vector<double> none;
  CHECK_NOTHROW(coulomb_field(empty.view(), {}, none, none, none));
  const Cloud one{{1e-6}, {0.0}, {0.0}, {oracle::e_charge}};
  std::vector<double> ex(1, 5.0), ey(1, 5.0), ez(1, 5.0);
  coulomb_field(one.view(), {}, ex, ey, ez);
  CHECK(ex[0] == 0.0);
  CHECK(coulomb_energy(one.view(), 1e-7) == 0.0);
}

}
