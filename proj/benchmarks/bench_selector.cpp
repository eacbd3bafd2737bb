#include <benchmark/benchmark.h>

#include "spice/empirics.hpp"
#include "spice/fisher_core.hpp"
#include "spice/oracle.hpp"
#include "spice/selector.hpp"

namespace {

spice::GradientSet population(std::size_t n, std::size_t d) {
  spice::SynthConfig cfg;
  cfg.n = n;
  cfg.d = d;
  cfg.seed = 12;
  return spice::generate_population(cfg);
}

// One pool of m = 120 candidates, k = 12; range(0) is d.
void BM_SelectPool(benchmark::State& state, spice::Backend backend) {
  const auto gs = population(120, static_cast<std::size_t>(state.range(0)));
  spice::SelectionConfig cfg;
  cfg.budget_k = 12;
  cfg.backend = backend;
  const auto candidates = spice::all_indices(gs.n());
  for (auto _ : state) benchmark::DoNotOptimize(spice::greedy_select(gs, candidates, cfg));
}
BENCHMARK_CAPTURE(BM_SelectPool, dense, spice::Backend::dense)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SelectPool, diagonal, spice::Backend::diagonal)
    ->Arg(64)
    ->Arg(256)
    ->Arg(512)
    ->Unit(benchmark::kMillisecond);

void BM_Streaming(benchmark::State& state) {
  const auto gs = population(static_cast<std::size_t>(state.range(0)), 128);
  spice::SelectionConfig cfg;
  cfg.pool_size_m = 120;
  for (auto _ : state) benchmark::DoNotOptimize(spice::streaming_select(gs, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Streaming)->Arg(1200)->Arg(4800)->Unit(benchmark::kMillisecond);

void BM_AddSample(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto gs = population(256, d);
  for (auto _ : state) {
    spice::FisherState s(d, spice::ScalingParams(1.0), spice::Backend::dense);
    for (std::size_t i = 0; i < 16; ++i) s.add_sample(i, gs.row(i));
    benchmark::DoNotOptimize(s.logdet());
  }
}
BENCHMARK(BM_AddSample)->Arg(128)->Arg(512);

void BM_ExhaustiveOptimum(benchmark::State& state) {
  const auto gs = population(14, 8);
  for (auto _ : state) benchmark::DoNotOptimize(spice::exhaustive_optimum(gs, 4, spice::ScalingParams(1.0)));
}
BENCHMARK(BM_ExhaustiveOptimum)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
