#include <benchmark/benchmark.h>

#include "pdhjb/bsde.hpp"
#include "pdhjb/mc.hpp"
#include "pdhjb/simulate.hpp"

using namespace pdhjb;

namespace {

DiscretePath start_at(const ControlModel& m, double dt, double x) {
  return DiscretePath::constant(make_grid(m.horizon, dt), HVector::Constant(m.dim(), x), 0);
}

void CounterStreamNormals(benchmark::State& state) {
  const CounterRng rng(SeedSequence(1).fold(stream::kSimulateNoise).key());
  std::uint64_t ctr = 0;
  double acc = 0.0;
  for (auto _ : state) {
    acc += rng.normal(ctr++);
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(CounterStreamNormals);

void UpsilonDerivatives(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  HVector x = HVector::Constant(dim, 0.4);
  for (auto _ : state) {
    const FunctionalDerivatives d = eval_upsilon(1.3, x, 3.0);
    benchmark::DoNotOptimize(d.value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(UpsilonDerivatives)->RangeMultiplier(2)->Range(1, 8)->Complexity();

void SimulatePaths(benchmark::State& state) {
  const ControlModel m = make_uncontrolled();
  const double dt = 1e-2;
  const DiscretePath init = start_at(m, dt, 0.5);
  const Policy pol = make_constant_policy(0.0);
  const int n_paths = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const TrajectoryBatch b = simulate(m, init, pol, dt, n_paths, 7, 1);
    benchmark::DoNotOptimize(b.states.data());
  }
  state.SetItemsProcessed(state.iterations() * n_paths * make_grid(m.horizon, dt).n_steps);
}
BENCHMARK(SimulatePaths)->Arg(256)->Arg(1024)->Arg(4096);

void BackwardSolve(benchmark::State& state) {
  const ControlModel m = make_uncontrolled();
  const double dt = 1e-2;
  const DiscretePath init = start_at(m, dt, 0.5);
  const TrajectoryBatch b =
      simulate(m, init, make_constant_policy(0.0), dt, static_cast<int>(state.range(0)), 7, 1);
  for (auto _ : state) {
    const BSDEGridSolution sol = solve_lsmc(m, b);
    benchmark::DoNotOptimize(sol.y0);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * b.n_sim_steps());
}
BENCHMARK(BackwardSolve)->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
