#include <benchmark/benchmark.h>

#include "uspcov/datasets.hpp"
#include "uspcov/sampler.hpp"

using namespace uspcov;

namespace {

SamplerConfig bench_config(int iterations) {
  SamplerConfig config;
  config.total_iterations = iterations;
  config.burn_in = iterations / 6;
  config.thin = 1;
  config.compute_diagnostics = false;
  return config;
}

// Full chain on the univariate reference dataset (k = 8, scalar A walk).
void BM_ChainEightSchools(benchmark::State& state) {
  const Dataset data = eight_schools();
  const PriorSpec prior = PriorSpec::usp(v0_harmonic_mean(data), "usp-dm");
  const SamplerConfig config = bench_config(static_cast<int>(state.range(0)));
  std::uint64_t stream = 0;
  for (auto _ : state) {
    RngStream rng(1, stream++);
    benchmark::DoNotOptimize(run_chain(data, prior, config, rng));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ChainEightSchools)->Arg(6000)->Unit(benchmark::kMillisecond);

// Full chain on the bivariate reference dataset (k = 27, inverse-Wishart
// proposal), the dominant cost of a hospital coverage cell.
void BM_ChainHospital(benchmark::State& state) {
  const Dataset data = hospital27();
  const PriorSpec prior = PriorSpec::usp(hospital_pooled_sigma(), "usp-em");
  const SamplerConfig config = bench_config(static_cast<int>(state.range(0)));
  std::uint64_t stream = 0;
  for (auto _ : state) {
    RngStream rng(1, stream++);
    benchmark::DoNotOptimize(run_chain(data, prior, config, rng));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ChainHospital)->Arg(6000)->Unit(benchmark::kMillisecond);

void BM_GibbsThetaSweepHospital(benchmark::State& state) {
  const Dataset data = hospital27();
  const HyperState hyper{hospital_pooled_sigma(),
                         hospital_beta_gen()};
  RngStream rng(2, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gibbs_update_theta(data, hyper, rng));
  }
  state.SetItemsProcessed(state.iterations() * data.k());
}
BENCHMARK(BM_GibbsThetaSweepHospital);

}  // namespace
