#include <benchmark/benchmark.h>

#include "uspcov/coverage.hpp"
#include "uspcov/datasets.hpp"

using namespace uspcov;

namespace {

// One small coverage cell end to end: mock-data generation, chain fits,
// intervals and the Rao-Blackwellized accumulation. Scaled down so a single
// benchmark repetition stays around a second; real cells scale linearly in
// n_sim and chain length.
void BM_EvaluateCellEightSchools(benchmark::State& state) {
  const ExperimentPreset preset =
      experiment_preset("eight-schools", Scale::Desk);
  SamplerConfig config = preset.sampler;
  config.total_iterations = 3000;
  config.burn_in = 1000;
  GenerativeConfig gen = preset.grid[2];
  gen.n_sim = static_cast<int>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_cell(preset.dataset.data,
                                           preset.priors[0], gen, config,
                                           seed++, 0.95, 1));
  }
  state.SetItemsProcessed(state.iterations() * gen.n_sim);
}
BENCHMARK(BM_EvaluateCellEightSchools)
    ->Arg(16)
    ->Unit(benchmark::kMillisecond);

void BM_MockDatasetHospital(benchmark::State& state) {
  const ExperimentPreset preset =
      experiment_preset("hospital-27", Scale::Desk);
  RngStream rng(6, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        generate_mock_dataset(preset.dataset.data, preset.grid[4], rng));
  }
}
BENCHMARK(BM_MockDatasetHospital);

}  // namespace
