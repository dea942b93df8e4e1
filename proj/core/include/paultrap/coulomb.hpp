#pragma once

#include <cstddef>
#include <span>

namespace paultrap::dynamics {

enum class CoulombMode { off, direct, cell_list };

/// Structure-of-arrays view of source/target particles.
struct ParticleView {
  std::span<const double> x, y, z;
  std::span<const double> charge; // C
};

struct FieldOptions {
  CoulombMode mode = CoulombMode::direct;
  double softening_length = 100e-9; // m
  // true: every ion's field is summed in a fixed order (row ownership),
  // bit-identical for any thread count. false: Newton-3 pair kernel with
  // per-thread partial buffers; differs at rounding level between thread counts.
  bool deterministic_reduction = true;
  unsigned threads = 1;
};

/// Softened Coulomb field at every particle from all others (V/m):
///   E_i = k_e sum_{j != i} Q_j (r_i - r_j) / (|r_i - r_j|^2 + eps^2)^{3/2}
/// Outputs must have the same length as the inputs.
void coulomb_field(const ParticleView &particles, const FieldOptions &options,
                   std::span<double> ex, std::span<double> ey, std::span<double> ez);

/// Softened pair potential energy sum_{i<j} k_e Q_i Q_j / sqrt(r^2 + eps^2), J.
double coulomb_energy(const ParticleView &particles, double softening_length);

} // namespace paultrap::dynamics
