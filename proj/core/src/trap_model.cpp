#include "paultrap/trap_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "paultrap/errors.hpp"
#include "paultrap/units.hpp"

namespace paultrap::trap {

namespace {

void require(bool ok, const char *what) {
  if (!ok)
    throw ValidationError(what);
}

// Force without the region check; used by the integrators, which handle
// escaping ions themselves.
double ponderomotive_coefficient(const TrapGeometry &g, const DriveSettings &d,
                                 const IonSpecies &s) {
  // U_rf = coefficient * rho^2
  const double amp = s.charge * g.eta_rf * d.v_rf;
  return amp * amp / (4.0 * s.mass * d.omega_rf * d.omega_rf * std::pow(g.r0, 4));
}

double endcap_coefficient(const TrapGeometry &g, const DriveSettings &d, const IonSpecies &s) {
  // U_dc = coefficient * (z^2 - rho^2 / 2)
  return s.charge * g.kappa_axial * d.v_ec / (g.z0 * g.z0);
}

double split_coefficient(const TrapGeometry &g, const DriveSettings &d, const IonSpecies &s) {
  // U_split = coefficient * (x^2 - y^2) / 2
  return s.charge * g.eta_rf * d.v_dc / (g.r0 * g.r0);
}

double unchecked_pseudopotential(double x, double y, double z, double c_rf, double c_dc,
                                 double c_split) {
  const double rho2 = x * x + y * y;
  return c_rf * rho2 + c_dc * (z * z - 0.5 * rho2) + 0.5 * c_split * (x * x - y * y);
}

} // namespace

void TrapGeometry::validate() const {
  require(r0 > 0.0, "trap.r0 must be > 0");
  require(z0 > 0.0, "trap.z0 must be > 0");
  require(kappa_axial > 0.0 && kappa_axial <= 1.0, "trap.kappa_axial must be in (0, 1]");
  require(eta_rf > 0.0 && eta_rf <= 1.0, "trap.eta_rf must be in (0, 1]");
}

void DriveSettings::validate() const {
  require(omega_rf > 0.0, "drive.omega_rf must be > 0");
  require(v_rf >= 0.0, "drive.v_rf must be >= 0");
  require(v_ec >= 0.0, "drive.v_ec must be >= 0");
  require(std::isfinite(v_dc), "drive.v_dc must be finite");
}

void IonSpecies::validate() const {
  require(mass > 0.0, "species mass must be > 0");
  require(charge > 0.0, "species charge must be > 0");
}

IonSpecies strontium88() {
  return {"Sr+", 88.0 * units::atomic_mass_unit, units::elementary_charge, true};
}

MathieuParams mathieu_params(const TrapGeometry &geometry, const DriveSettings &drive,
                             const IonSpecies &species) {
  const double w2 = drive.omega_rf * drive.omega_rf;
  MathieuParams p;
  p.q_radial = 2.0 * geometry.eta_rf * species.charge * drive.v_rf /
               (species.mass * geometry.r0 * geometry.r0 * w2);
  p.a_axial = 8.0 * geometry.kappa_axial * species.charge * drive.v_ec /
              (species.mass * geometry.z0 * geometry.z0 * w2);
  p.a_radial = -0.5 * p.a_axial;
  p.a_split = 4.0 * geometry.eta_rf * species.charge * drive.v_dc /
              (species.mass * geometry.r0 * geometry.r0 * w2);
  return p;
}

StabilityReport stability_check(const MathieuParams &p) {
  // Each bound expressed as a signed slack; the report carries the smallest.
  // the weaker of the x and y directions
  const double radicand = p.a_radial - std::abs(p.a_split) + 0.5 * p.q_radial * p.q_radial;
  const double slacks[] = {p.q_radial, first_region_q_limit - p.q_radial, radicand, p.a_axial};
  const double margin = *std::min_element(std::begin(slacks), std::end(slacks));
  const bool stable = p.q_radial >= 0.0 && p.q_radial < first_region_q_limit && radicand > 0.0 &&
                      p.a_axial >= 0.0;
  return {stable, margin};
}

SecularFrequencies secular_frequencies(const MathieuParams &params, const DriveSettings &drive) {
  if (!stability_check(params).stable)
    throw UnstableParameters("secular frequencies undefined: parameters outside the first "
                             "stability region");
  const double scale = drive.omega_rf / (4.0 * units::pi);
  return {scale * std::sqrt(params.a_radial + 0.5 * params.q_radial * params.q_radial),
          scale * std::sqrt(params.a_axial)};
}

double mathieu_beta(double a, double q) {
  const double radicand = a + 0.5 * q * q;
  if (!(radicand > 0.0) || std::abs(q) >= first_region_q_limit)
    throw UnstableParameters("mathieu_beta: outside the first stability region");

  constexpr int depth = 24;
  const double q2 = q * q;
  auto tail = [&](double beta, double sign) {
    double d = 0.0;
    for (int k = depth; k >= 1; --k) {
      const double b = beta + sign * 2.0 * k;
      d = q2 / (b * b - a - d);
    }
    return d;
  };

  double beta = std::sqrt(radicand);
  for (int it = 0; it < 200; ++it) {
    const double b2 = a + tail(beta, +1.0) + tail(beta, -1.0);
    if (!(b2 > 0.0) || b2 >= 1.0)
      throw UnstableParameters("mathieu_beta: continued fraction left the first region");
    const double next = std::sqrt(b2);
    if (std::abs(next - beta) < 1e-15) {
      beta = next;
      break;
    }
    beta = 0.5 * (beta + next);
  }
  return beta;
}

double exact_radial_frequency(const MathieuParams &params, const DriveSettings &drive) {
  if (!stability_check(params).stable)
    throw UnstableParameters("exact_radial_frequency: unstable parameters");
  return mathieu_beta(params.a_radial, params.q_radial) * drive.omega_rf / (4.0 * units::pi);
}

bool inside_region(const Vec3 &p, const TrapGeometry &g) {
  return std::abs(p.x) < g.r0 && std::abs(p.y) < g.r0 && std::abs(p.z) < g.z0;
}

Vec3 instantaneous_force(const Vec3 &position, double time, const TrapGeometry &geometry,
                         const DriveSettings &drive, const IonSpecies &species) {
  if (!inside_region(position, geometry))
    throw OutOfRegion("instantaneous_force: position outside the quadrupole region");
  const double rf = geometry.eta_rf * drive.v_rf * std::cos(drive.omega_rf * time) /
                    (geometry.r0 * geometry.r0);
  const double dc = geometry.kappa_axial * drive.v_ec / (geometry.z0 * geometry.z0);
  const double split = geometry.eta_rf * drive.v_dc / (geometry.r0 * geometry.r0);
  // F = -Q grad(Phi)
  const double Q = species.charge;
  return {-Q * (rf - dc + split) * position.x, -Q * (-rf - dc - split) * position.y,
          -Q * 2.0 * dc * position.z};
}

double pseudopotential_energy(const Vec3 &position, const TrapGeometry &geometry,
                              const DriveSettings &drive, const IonSpecies &species) {
  if (!inside_region(position, geometry))
    throw OutOfRegion("pseudopotential_energy: position outside the quadrupole region");
  return unchecked_pseudopotential(position.x, position.y, position.z,
                                   ponderomotive_coefficient(geometry, drive, species),
                                   endcap_coefficient(geometry, drive, species),
                                   split_coefficient(geometry, drive, species));
}

PseudopotentialCurvature pseudopotential_curvature(const TrapGeometry &geometry,
                                                   const DriveSettings &drive,
                                                   const IonSpecies &species) {
  const double c_rf = ponderomotive_coefficient(geometry, drive, species);
  const double c_dc = endcap_coefficient(geometry, drive, species);
  return {2.0 * c_rf - c_dc, 2.0 * c_dc, split_coefficient(geometry, drive, species)};
}

Vec3 pseudopotential_force(const Vec3 &position, const TrapGeometry &geometry,
                           const DriveSettings &drive, const IonSpecies &species) {
  if (!inside_region(position, geometry))
    throw OutOfRegion("pseudopotential_force: position outside the quadrupole region");
  const auto k = pseudopotential_curvature(geometry, drive, species);
  return {-(k.radial + k.split) * position.x, -(k.radial - k.split) * position.y,
          -k.axial * position.z};
}

VolumeEstimate trap_volume(const TrapGeometry &geometry, const DriveSettings &drive,
                           const IonSpecies &species, const GridSpec &grid) {
  geometry.validate();
  drive.validate();
  if (!(grid.resolution > 0.0) || grid.resolution > geometry.r0 / 20.0 * (1.0 + 1e-12))
    throw ValidationError("trap_volume: grid resolution must be in (0, r0/20]");

  const int nr = static_cast<int>(std::ceil(geometry.r0 / grid.resolution - 1e-9));
  const int nz = static_cast<int>(std::ceil(geometry.z0 / grid.resolution - 1e-9));
  const double hr = geometry.r0 / nr;
  const double hz = geometry.z0 / nz;
  VolumeEstimate out{0.0, 0.0, std::max(hr, hz)};

  if (!stability_check(mathieu_params(geometry, drive, species)).stable)
    return out;

  const double c_rf = ponderomotive_coefficient(geometry, drive, species);
  const double c_dc = endcap_coefficient(geometry, drive, species);
  const double c_split = split_coefficient(geometry, drive, species);
  auto U = [&](int i, int j, int k) {
    return unchecked_pseudopotential(i * hr, j * hr, k * hz, c_rf, c_dc, c_split);
  };

  // Lowest point on the box boundary (U(origin) = 0).
  double depth = std::numeric_limits<double>::infinity();
  for (int i = -nr; i <= nr; ++i)
    for (int j = -nr; j <= nr; ++j)
      for (int k = -nz; k <= nz; ++k) {
        const bool boundary = std::abs(i) == nr || std::abs(j) == nr || std::abs(k) == nz;
        if (!boundary) {
          // interior column: skip ahead to the far z face
          k = nz - 1;
          continue;
        }
        depth = std::min(depth, U(i, j, k));
      }
  if (!(depth > 0.0))
    return out;
  out.depth = depth;

  // Flood fill of {U < depth} from the centre with 6-connectivity.
  const int sx = 2 * nr + 1;
  const int sz = 2 * nz + 1;
  auto index = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(i + nr) * sx + static_cast<std::size_t>(j + nr)) * sz +
           static_cast<std::size_t>(k + nz);
  };
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(sx) * sx * sz, 0);
  struct Node {
    int i, j, k;
  };
  std::vector<Node> stack{{0, 0, 0}};
  seen[index(0, 0, 0)] = 1;
  std::size_t count = 0;
  constexpr int offsets[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                 {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  while (!stack.empty()) {
    const Node n = stack.back();
    stack.pop_back();
    ++count;
    for (const auto &o : offsets) {
      const int i = n.i + o[0], j = n.j + o[1], k = n.k + o[2];
      if (std::abs(i) >= nr || std::abs(j) >= nr || std::abs(k) >= nz)
        continue;
      const auto idx = index(i, j, k);
      if (seen[idx] || !(U(i, j, k) < depth))
        continue;
      seen[idx] = 1;
      stack.push_back({i, j, k});
    }
  }
  out.volume = static_cast<double>(count) * hr * hr * hz;
  return out;
}

double calibrate_kappa(double measured_nu_axial, const TrapGeometry &geometry,
                       const DriveSettings &drive, const IonSpecies &species) {
  if (!(measured_nu_axial > 0.0))
    throw ValidationError("calibrate_kappa: measured axial frequency must be > 0");
  if (!(drive.v_ec > 0.0))
    throw ValidationError("calibrate_kappa: end-cap voltage must be > 0");
  // nu_A = Omega/(4 pi) sqrt(a_axial)  =>  a_axial = (4 pi nu_A / Omega)^2
  const double root = 4.0 * units::pi * measured_nu_axial / drive.omega_rf;
  const double a_axial = root * root;
  return a_axial * species.mass * geometry.z0 * geometry.z0 * drive.omega_rf * drive.omega_rf /
         (8.0 * species.charge * drive.v_ec);
}

} // namespace paultrap::trap
