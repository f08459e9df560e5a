#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "picert/parallel.hpp"
#include "picert/pi.hpp"
#include "picert/system.hpp"

namespace {

const picert::GridProblem& grid() {
  static const picert::GridProblem g = [] {
    picert::GridSpec spec;
    spec.points_per_axis = 31;
    return picert::build_nonholonomic_example(0.86, spec);
  }();
  return g;
}

picert::ExecMode mode_of(const benchmark::State& state) {
  return state.range(0) ? picert::ExecMode::Parallel
                        : picert::ExecMode::Serial;
}

void BM_BellmanSweep(benchmark::State& state) {
  const picert::Tabular& t = grid().tab;
  std::vector<double> v(t.sigma.begin(), t.sigma.end());
  std::vector<double> out(v.size());
  const picert::ExecMode mode = mode_of(state);
  for (auto _ : state) {
    picert::bellman_sweep(t, v.data(), out.data(), mode);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * t.n_states);
}

void BM_ImproveSweep(benchmark::State& state) {
  const picert::Tabular& t = grid().tab;
  std::vector<double> v(t.sigma.begin(), t.sigma.end());
  std::vector<std::int32_t> actions(v.size());
  const picert::ExecMode mode = mode_of(state);
  for (auto _ : state) {
    picert::improve_sweep(t, v.data(), actions.data(), mode);
    benchmark::DoNotOptimize(actions.data());
  }
  state.SetItemsProcessed(state.iterations() * t.n_states);
}

void BM_BellmanResidual(benchmark::State& state) {
  const picert::Tabular& t = grid().tab;
  std::vector<double> v(t.sigma.begin(), t.sigma.end());
  const picert::ExecMode mode = mode_of(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(picert::bellman_residual(t, v.data(), mode));
  }
  state.SetItemsProcessed(state.iterations() * t.n_states);
}

BENCHMARK(BM_BellmanSweep)->ArgName("parallel")->Arg(0)->Arg(1);
BENCHMARK(BM_ImproveSweep)->ArgName("parallel")->Arg(0)->Arg(1);
BENCHMARK(BM_BellmanResidual)->ArgName("parallel")->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
