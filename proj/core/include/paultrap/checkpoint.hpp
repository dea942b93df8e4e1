#pragma once

#include <filesystem>
#include <iosfwd>

#include "paultrap/ion_dynamics.hpp"

// Versioned plain-text snapshot of a CloudState. Doubles are written as
// hexadecimal floating point, so a restored state continues bit-identically.
namespace paultrap::dynamics {

inline constexpr int checkpoint_version = 1;

void write_checkpoint(std::ostream &out, const CloudState &state);
CloudState read_checkpoint(std::istream &in);

void save_checkpoint(const std::filesystem::path &path, const CloudState &state);
CloudState load_checkpoint(const std::filesystem::path &path);

} // namespace paultrap::dynamics
