#include <benchmark/benchmark.h>

#include <vector>

#include "paultrap/coulomb.hpp"
#include "paultrap/ion_dynamics.hpp"
#include "paultrap/trap_model.hpp"
#include "paultrap/units.hpp"

using namespace paultrap;

namespace {

trap::TrapGeometry geometry() {
  trap::TrapGeometry g;
  g.kappa_axial = 1.4402606786046671e-3;
  return g;
}

const trap::DriveSettings drive{units::two_pi * 2.5e6, 500.0, 500.0};

dynamics::CloudState cloud(std::size_t n) {
  dynamics::CloudRecipe r;
  r.composition = {{trap::strontium88(), n}};
  return dynamics::synthesize_cloud(r, geometry(), drive, 1);
}

void coulomb(benchmark::State &state, dynamics::CoulombMode mode) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = cloud(n);
  std::vector<double> q(n, units::elementary_charge), ex(n), ey(n), ez(n);
  const dynamics::ParticleView view{c.x, c.y, c.z, q};
  const dynamics::FieldOptions options{mode};
  for (auto _ : state) {
    dynamics::coulomb_field(view, options, ex, ey, ez);
    benchmark::DoNotOptimize(ex.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_CoulombDirect(benchmark::State &state) { coulomb(state, dynamics::CoulombMode::direct); }
void BM_CoulombCellList(benchmark::State &state) { coulomb(state, dynamics::CoulombMode::cell_list); }

void step(benchmark::State &state, dynamics::FieldMode mode) {
  const auto n = static_cast<std::size_t>(state.range(0));
  dynamics::SimulationContext ctx;
  ctx.geometry = geometry();
  ctx.drive = drive;
  ctx.integrator.field_mode = mode;
  const auto sr = trap::strontium88();
  ctx.integrator.dt = dynamics::default_timestep(mode, ctx.geometry, ctx.drive, {&sr, 1});
  auto s = cloud(n);
  dynamics::Integrator integ(ctx);
  for (auto _ : state)
    integ.step(s);
  state.counters["steps/s"] = benchmark::Counter(static_cast<double>(state.iterations()),
                                                 benchmark::Counter::kIsRate);
}

void BM_StepFullRf(benchmark::State &state) { step(state, dynamics::FieldMode::full_rf); }
void BM_StepSecular(benchmark::State &state) { step(state, dynamics::FieldMode::secular); }

void BM_TrapVolume(benchmark::State &state) {
  const auto g = geometry();
  const trap::GridSpec grid{static_cast<double>(state.range(0)) * 1e-6};
  for (auto _ : state)
    benchmark::DoNotOptimize(trap::trap_volume(g, drive, trap::strontium88(), grid));
}

} // namespace

BENCHMARK(BM_CoulombDirect)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_CoulombCellList)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_StepFullRf)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StepSecular)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrapVolume)->Arg(160)->Arg(80)->Arg(40)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
