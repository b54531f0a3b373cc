#include <benchmark/benchmark.h>

#include "uspcov/stochastics.hpp"

using namespace uspcov;

namespace {

void BM_SampleInverseWishart(benchmark::State& state) {
  Eigen::MatrixXd psi(2, 2);
  psi << 148.87, 140.43, 140.43, 490.60;
  const SpdMatrix scale(psi);
  RngStream rng(3, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_inverse_wishart(40.0, scale, rng));
  }
}
BENCHMARK(BM_SampleInverseWishart);

void BM_BivariateRectangleProb(benchmark::State& state) {
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.9, 0.9, 1.5;
  const GaussianMoments m{Eigen::Vector2d(0.1, -0.3), SpdMatrix(cov)};
  const Eigen::Vector2d lower(-1.8, -2.2), upper(1.4, 1.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mvn_rectangle_prob(m, lower, upper));
  }
}
BENCHMARK(BM_BivariateRectangleProb);

void BM_PosteriorQuantiles(benchmark::State& state) {
  RngStream rng(4, 0);
  std::vector<double> chain(static_cast<std::size_t>(state.range(0)));
  for (auto& v : chain) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(empirical_quantile(chain, 0.975));
  }
}
BENCHMARK(BM_PosteriorQuantiles)->Arg(20000);

void BM_EffectiveSampleSize(benchmark::State& state) {
  RngStream rng(5, 0);
  std::vector<double> chain(20000);
  double x = 0.0;
  for (auto& v : chain) {
    x = 0.6 * x + rng.normal();
    v = x;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(effective_sample_size(chain));
  }
}
BENCHMARK(BM_EffectiveSampleSize);

}  // namespace
