#include "paultrap/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>

#include "paultrap/errors.hpp"

namespace paultrap::dynamics {

namespace {

constexpr const char *magic = "paultrap-checkpoint";

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double read_double(std::istream &in, const char *field) {
  std::string token;
  if (!(in >> token))
    throw ValidationError(std::string("checkpoint: missing value for ") + field);
  char *end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw ValidationError(std::string("checkpoint: malformed number for ") + field + ": " + token);
  return v;
}

void expect(std::istream &in, const std::string &keyword) {
  std::string token;
  if (!(in >> token) || token != keyword)
    throw ValidationError("checkpoint: expected '" + keyword + "', found '" + token + "'");
}

} // namespace

void write_checkpoint(std::ostream &out, const CloudState &state) {
  out << magic << ' ' << checkpoint_version << '\n';
  out << "time " << hex(state.time) << '\n';
  out << "lost " << state.lost << '\n';
  out << "species " << state.species.size() << '\n';
  for (const auto &s : state.species)
    out << std::quoted(s.name) << ' ' << hex(s.mass) << ' ' << hex(s.charge) << ' '
        << (s.laser_cooled ? 1 : 0) << '\n';
  out << "ions " << state.size() << '\n';
  for (std::size_t i = 0; i < state.size(); ++i)
    out << hex(state.x[i]) << ' ' << hex(state.y[i]) << ' ' << hex(state.z[i]) << ' '
        << hex(state.vx[i]) << ' ' << hex(state.vy[i]) << ' ' << hex(state.vz[i]) << ' '
        << state.species_index[i] << '\n';
  out << "rng " << state.rng << '\n';
  out << "end\n";
  if (!out)
    throw SimulationError("checkpoint: write failed");
}

CloudState read_checkpoint(std::istream &in) {
  expect(in, magic);
  int version = 0;
  if (!(in >> version) || version != checkpoint_version)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));

  CloudState state;
  expect(in, "time");
  state.time = read_double(in, "time");
  expect(in, "lost");
  if (!(in >> state.lost))
    throw ValidationError("checkpoint: malformed lost count");

  std::size_t n_species = 0;
  expect(in, "species");
  if (!(in >> n_species))
    throw ValidationError("checkpoint: malformed species count");
  for (std::size_t s = 0; s < n_species; ++s) {
    trap::IonSpecies sp;
    int cooled = 0;
    if (!(in >> std::quoted(sp.name)))
      throw ValidationError("checkpoint: malformed species name");
    sp.mass = read_double(in, "mass");
    sp.charge = read_double(in, "charge");
    if (!(in >> cooled))
      throw ValidationError("checkpoint: malformed species flag");
    sp.laser_cooled = cooled != 0;
    sp.validate();
    state.species.push_back(sp);
  }

  std::size_t n = 0;
  expect(in, "ions");
  if (!(in >> n))
    throw ValidationError("checkpoint: malformed ion count");
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p{read_double(in, "x"), read_double(in, "y"), read_double(in, "z")};
    const Vec3 v{read_double(in, "vx"), read_double(in, "vy"), read_double(in, "vz")};
    std::uint32_t sid = 0;
    if (!(in >> sid))
      throw ValidationError("checkpoint: malformed species index");
    state.add_ion(p, v, sid);
  }
  expect(in, "rng");
  if (!(in >> state.rng))
    throw ValidationError("checkpoint: malformed generator state");
  expect(in, "end");
  state.validate();
  return state;
}

void save_checkpoint(const std::filesystem::path &path, const CloudState &state) {
  std::ofstream out(path);
  if (!out)
    throw SimulationError("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(out, state);
}

CloudState load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

} // namespace paultrap::dynamics
