#include "paultrap/coulomb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "paultrap/errors.hpp"
#include "paultrap/parallel.hpp"
#include "paultrap/units.hpp"

namespace paultrap::dynamics {

namespace {

struct Accumulator {
  double x = 0.0, y = 0.0, z = 0.0;
};

// 1/r^3 from r^2: single-precision seed refined by one Newton step in double
// (relative error ~1e-14). Vectorizes without fast-math.
inline double inverse_cube(double r2) {
  double y = 1.0f / std::sqrt(static_cast<float>(r2));
  y = y * (1.5 - 0.5 * r2 * y * y);
  return y * y * y;
}

// Adds the field of sources [begin, end) at point (xi, yi, zi). The caller
// guarantees the target itself is not in the range.
#if defined(__AVX512F__)
inline Accumulator sum_range(const double *__restrict x, const double *__restrict y,
                             const double *__restrict z, const double *__restrict q,
                             std::size_t begin, std::size_t end, double xi, double yi, double zi,
                             double eps2) {
  const __m512d px = _mm512_set1_pd(xi), py = _mm512_set1_pd(yi), pz = _mm512_set1_pd(zi);
  const __m512d e2 = _mm512_set1_pd(eps2), half = _mm512_set1_pd(0.5), three = _mm512_set1_pd(3.0);
  const __m512d one = _mm512_set1_pd(1.0);
  __m512d sx = _mm512_setzero_pd(), sy = _mm512_setzero_pd(), sz = _mm512_setzero_pd();
  for (std::size_t j = begin; j < end; j += 8) {
    const auto left = end - j;
    const __mmask8 m = left >= 8 ? __mmask8(0xff) : __mmask8((1u << left) - 1u);
    const __m512d dx = _mm512_sub_pd(px, _mm512_maskz_loadu_pd(m, x + j));
    const __m512d dy = _mm512_sub_pd(py, _mm512_maskz_loadu_pd(m, y + j));
    const __m512d dz = _mm512_sub_pd(pz, _mm512_maskz_loadu_pd(m, z + j));
    // inactive lanes get r2 = 1 so the zero charge does not meet an infinity
    const __m512d r2 = _mm512_mask_blend_pd(
        m, one, _mm512_fmadd_pd(dx, dx, _mm512_fmadd_pd(dy, dy, _mm512_fmadd_pd(dz, dz, e2))));
    // 14-bit seed, two Newton steps: y <- y (3 - r2 y^2) / 2
    __m512d inv = _mm512_rsqrt14_pd(r2);
    inv = _mm512_mul_pd(_mm512_mul_pd(half, inv), _mm512_fnmadd_pd(_mm512_mul_pd(r2, inv), inv, three));
    inv = _mm512_mul_pd(_mm512_mul_pd(half, inv), _mm512_fnmadd_pd(_mm512_mul_pd(r2, inv), inv, three));
    const __m512d w = _mm512_mul_pd(_mm512_maskz_loadu_pd(m, q + j),
                                    _mm512_mul_pd(inv, _mm512_mul_pd(inv, inv)));
    sx = _mm512_fmadd_pd(w, dx, sx);
    sy = _mm512_fmadd_pd(w, dy, sy);
    sz = _mm512_fmadd_pd(w, dz, sz);
  }
  return {_mm512_reduce_add_pd(sx), _mm512_reduce_add_pd(sy), _mm512_reduce_add_pd(sz)};
}
#else
inline Accumulator sum_range(const double *__restrict x, const double *__restrict y,
                             const double *__restrict z, const double *__restrict q,
                             std::size_t begin, std::size_t end, double xi, double yi, double zi,
                             double eps2) {
  double sx = 0.0, sy = 0.0, sz = 0.0;
#pragma omp simd reduction(+ : sx, sy, sz)
  for (std::size_t j = begin; j < end; ++j) {
    const double dx = xi - x[j];
    const double dy = yi - y[j];
    const double dz = zi - z[j];
    const double r2 = dx * dx + dy * dy + dz * dz + eps2;
    const double w = q[j] * inverse_cube(r2);
    sx += w * dx;
    sy += w * dy;
    sz += w * dz;
  }
  return {sx, sy, sz};
}
#endif

void direct_rows(const ParticleView &p, double eps2, unsigned threads, std::span<double> ex,
                 std::span<double> ey, std::span<double> ez) {
  const std::size_t n = p.x.size();
  const double *x = p.x.data(), *y = p.y.data(), *z = p.z.data(), *q = p.charge.data();
  parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto lo = sum_range(x, y, z, q, 0, i, x[i], y[i], z[i], eps2);
      const auto hi = sum_range(x, y, z, q, i + 1, n, x[i], y[i], z[i], eps2);
      ex[i] = units::coulomb_constant * (lo.x + hi.x);
      ey[i] = units::coulomb_constant * (lo.y + hi.y);
      ez[i] = units::coulomb_constant * (lo.z + hi.z);
    }
  });
}

// Newton-3 kernel: each pair is evaluated once and scattered to both ends.
void pair_chunk(const ParticleView &p, double eps2, std::size_t begin, std::size_t end,
                double *__restrict bx, double *__restrict by, double *__restrict bz) {
  const std::size_t n = p.x.size();
  const double *x = p.x.data(), *y = p.y.data(), *z = p.z.data(), *q = p.charge.data();
  for (std::size_t i = begin; i < end; ++i) {
    const double xi = x[i], yi = y[i], zi = z[i], qi = q[i];
    double sx = 0.0, sy = 0.0, sz = 0.0;
#pragma omp simd reduction(+ : sx, sy, sz)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = xi - x[j];
      const double dy = yi - y[j];
      const double dz = zi - z[j];
      const double r2 = dx * dx + dy * dy + dz * dz + eps2;
      const double inv = inverse_cube(r2);
      const double wi = q[j] * inv;
      const double wj = qi * inv;
      sx += wi * dx;
      sy += wi * dy;
      sz += wi * dz;
      bx[j] -= wj * dx;
      by[j] -= wj * dy;
      bz[j] -= wj * dz;
    }
    bx[i] += sx;
    by[i] += sy;
    bz[i] += sz;
  }
}

void direct_pairs(const ParticleView &p, double eps2, unsigned threads, std::span<double> ex,
                  std::span<double> ey, std::span<double> ez) {
  const std::size_t n = p.x.size();
  std::fill(ex.begin(), ex.end(), 0.0);
  std::fill(ey.begin(), ey.end(), 0.0);
  std::fill(ez.begin(), ez.end(), 0.0);
  threads = std::max(1u, threads);
  if (threads == 1 || n < 64) {
    pair_chunk(p, eps2, 0, n, ex.data(), ey.data(), ez.data());
  } else {
    // Row i costs (n - i); split so every chunk carries ~equal pair work.
    std::vector<std::size_t> bounds(threads + 1, n);
    bounds[0] = 0;
    for (unsigned t = 1; t < threads; ++t) {
      const double frac = static_cast<double>(t) / threads;
      bounds[t] = static_cast<std::size_t>(n * (1.0 - std::sqrt(1.0 - frac)));
    }
    std::vector<std::vector<double>> partial(threads, std::vector<double>(3 * n, 0.0));
    parallel_chunks(threads, threads, [&](std::size_t tb, std::size_t te, unsigned) {
      for (std::size_t t = tb; t < te; ++t) {
        auto &buf = partial[t];
        pair_chunk(p, eps2, bounds[t], bounds[t + 1], buf.data(), buf.data() + n,
                   buf.data() + 2 * n);
      }
    });
    for (unsigned t = 0; t < threads; ++t)
      for (std::size_t i = 0; i < n; ++i) {
        ex[i] += partial[t][i];
        ey[i] += partial[t][n + i];
        ez[i] += partial[t][2 * n + i];
      }
  }
  for (std::size_t i = 0; i < n; ++i) {
    ex[i] *= units::coulomb_constant;
    ey[i] *= units::coulomb_constant;
    ez[i] *= units::coulomb_constant;
  }
}

// Uniform cell grid over the cloud's bounding box, particles sorted by cell.
struct CellGrid {
  int nx = 1, ny = 1, nz = 1;
  std::vector<std::size_t> start; // cell c occupies [start[c], start[c+1]) of the sorted arrays
  std::vector<std::size_t> order; // sorted position -> original index
  std::vector<double> x, y, z, q;

  int cell_count() const { return nx * ny * nz; }
  int flat(int i, int j, int k) const { return (i * ny + j) * nz + k; }
};

CellGrid build_cells(const ParticleView &p, std::size_t target_per_cell) {
  const std::size_t n = p.x.size();
  CellGrid g;
  double lo[3] = {p.x[0], p.y[0], p.z[0]};
  double hi[3] = {lo[0], lo[1], lo[2]};
  for (std::size_t i = 1; i < n; ++i) {
    const double r[3] = {p.x[i], p.y[i], p.z[i]};
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], r[d]);
      hi[d] = std::max(hi[d], r[d]);
    }
  }
  double extent[3];
  double vol = 1.0;
  int dims = 0;
  for (int d = 0; d < 3; ++d) {
    extent[d] = hi[d] - lo[d];
    if (extent[d] > 0.0) {
      vol *= extent[d];
      ++dims;
    }
  }
  const double cells_wanted = std::max<double>(1.0, static_cast<double>(n) / target_per_cell);
  const double h = dims == 0 ? 1.0 : std::pow(vol / cells_wanted, 1.0 / dims);
  int counts[3];
  for (int d = 0; d < 3; ++d)
    counts[d] = extent[d] > 0.0 ? std::clamp(static_cast<int>(std::ceil(extent[d] / h)), 1, 256) : 1;
  g.nx = counts[0];
  g.ny = counts[1];
  g.nz = counts[2];

  auto axis_cell = [&](double v, int d) {
    if (counts[d] == 1)
      return 0;
    const int c = static_cast<int>((v - lo[d]) / extent[d] * counts[d]);
    return std::clamp(c, 0, counts[d] - 1);
  };
  std::vector<int> cell_of(n);
  std::vector<std::size_t> fill(g.cell_count() + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    cell_of[i] = g.flat(axis_cell(p.x[i], 0), axis_cell(p.y[i], 1), axis_cell(p.z[i], 2));
    ++fill[cell_of[i] + 1];
  }
  for (int c = 0; c < g.cell_count(); ++c)
    fill[c + 1] += fill[c];
  g.start = fill;
  g.order.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    g.order[fill[cell_of[i]]++] = i; // stable counting sort
  g.x.resize(n);
  g.y.resize(n);
  g.z.resize(n);
  g.q.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto i = g.order[s];
    g.x[s] = p.x[i];
    g.y[s] = p.y[i];
    g.z[s] = p.z[i];
    g.q[s] = p.charge[i];
  }
  return g;
}

// Exact summation organised by cells. Particles are sorted by cell, so the
// 27-cell neighbourhood is at most nine contiguous runs and the far field is
// their complement; both are summed over long ranges. Coulomb forces are
// unscreened, so no cell is skipped.
void cell_list_field(const ParticleView &p, double eps2, unsigned threads, std::span<double> ex,
                     std::span<double> ey, std::span<double> ez) {
  const CellGrid g = build_cells(p, 8);
  const double *x = g.x.data(), *y = g.y.data(), *z = g.z.data(), *q = g.q.data();
  const std::size_t n = g.x.size();
  const int nc = g.cell_count();

  struct Range {
    std::size_t begin, end;
  };
  parallel_chunks(static_cast<std::size_t>(nc), threads, [&](std::size_t cb, std::size_t ce, unsigned) {
    std::vector<Range> near, far;
    for (std::size_t c = cb; c < ce; ++c) {
      const std::size_t first = g.start[c], last = g.start[c + 1];
      if (first == last)
        continue;
      const int ci = static_cast<int>(c) / (g.ny * g.nz);
      const int cj = (static_cast<int>(c) / g.nz) % g.ny;
      const int ck = static_cast<int>(c) % g.nz;
      const int klo = std::max(ck - 1, 0), khi = std::min(ck + 1, g.nz - 1);
      near.clear();
      for (int i = std::max(ci - 1, 0); i <= std::min(ci + 1, g.nx - 1); ++i)
        for (int j = std::max(cj - 1, 0); j <= std::min(cj + 1, g.ny - 1); ++j)
          near.push_back({g.start[g.flat(i, j, klo)], g.start[g.flat(i, j, khi) + 1]});
      far.clear();
      std::size_t cursor = 0;
      for (const auto &r : near) {
        if (r.begin > cursor)
          far.push_back({cursor, r.begin});
        cursor = r.end;
      }
      if (cursor < n)
        far.push_back({cursor, n});

      for (std::size_t s = first; s < last; ++s) {
        const double xi = x[s], yi = y[s], zi = z[s];
        Accumulator near_sum, far_sum;
        auto add = [&](Accumulator &acc, std::size_t b, std::size_t e) {
          if (b >= e)
            return;
          const auto part = sum_range(x, y, z, q, b, e, xi, yi, zi, eps2);
          acc.x += part.x;
          acc.y += part.y;
          acc.z += part.z;
        };
        for (const auto &r : near) {
          if (s >= r.begin && s < r.end) {
            add(near_sum, r.begin, s);
            add(near_sum, s + 1, r.end);
          } else {
            add(near_sum, r.begin, r.end);
          }
        }
        for (const auto &r : far)
          add(far_sum, r.begin, r.end);
        const auto i = g.order[s];
        ex[i] = units::coulomb_constant * (near_sum.x + far_sum.x);
        ey[i] = units::coulomb_constant * (near_sum.y + far_sum.y);
        ez[i] = units::coulomb_constant * (near_sum.z + far_sum.z);
      }
    }
  });
}

} // namespace

void coulomb_field(const ParticleView &particles, const FieldOptions &options,
                   std::span<double> ex, std::span<double> ey, std::span<double> ez) {
  const std::size_t n = particles.x.size();
  if (particles.y.size() != n || particles.z.size() != n || particles.charge.size() != n ||
      ex.size() != n || ey.size() != n || ez.size() != n)
    throw ValidationError("coulomb_field: array length mismatch");
  if (options.softening_length < 0.0)
    throw ValidationError("coulomb_field: softening length must be >= 0");

  if (options.mode == CoulombMode::off || n < 2) {
    std::fill(ex.begin(), ex.end(), 0.0);
    std::fill(ey.begin(), ey.end(), 0.0);
    std::fill(ez.begin(), ez.end(), 0.0);
    return;
  }
  const double eps2 = options.softening_length * options.softening_length;
  const unsigned threads = resolve_threads(options.threads);
  if (options.mode == CoulombMode::cell_list)
    cell_list_field(particles, eps2, threads, ex, ey, ez);
  else if (options.deterministic_reduction)
    direct_rows(particles, eps2, threads, ex, ey, ez);
  else
    direct_pairs(particles, eps2, threads, ex, ey, ez);
}

double coulomb_energy(const ParticleView &p, double softening_length) {
  const std::size_t n = p.x.size();
  const double eps2 = softening_length * softening_length;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = p.x[i] - p.x[j];
      const double dy = p.y[i] - p.y[j];
      const double dz = p.z[i] - p.z[j];
      row += p.charge[j] / std::sqrt(dx * dx + dy * dy + dz * dz + eps2);
    }
    total += p.charge[i] * row;
  }
  return units::coulomb_constant * total;
}

} // namespace paultrap::dynamics
