#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "uspcov/coverage.hpp"
#include "uspcov/datasets.hpp"

using namespace uspcov;

namespace {

SpdMatrix spd1(double v) {
  return SpdMatrix(Eigen::MatrixXd::Constant(1, 1, v));
}

SamplerConfig tiny_chain() {
  SamplerConfig config;
  config.total_iterations = 1200;
  config.burn_in = 200;
  config.thin = 2;
  return config;
}

GenerativeConfig scalar_gen(double a_gen, double beta_gen, int n_sim,
                            std::string label = "cell") {
  GenerativeConfig gen;
  gen.A_gen = Eigen::MatrixXd::Constant(1, 1, a_gen);
  gen.beta_gen = Eigen::VectorXd::Constant(1, beta_gen);
  gen.n_sim = n_sim;
  gen.label = std::move(label);
  return gen;
}

}  // namespace

TEST_CASE("generate_mock_dataset: degenerate boundaries") {
  const Dataset tmpl = eight_schools();
  GenerativeConfig gen = scalar_gen(0.0, 7.95, 10, "B0=1");
  RngStream rng(1, 0);
  const MockData mock = generate_mock_dataset(tmpl, gen, rng);
  for (const auto& theta : mock.thetas_true) {
    CHECK(theta(0) == 7.95);  // zero A_gen pins theta at the regression mean
  }

  // Vanishing sampling variance copies theta into y.
  Dataset precise = tmpl;
  for (auto& g : precise.groups) g.V = spd1(1e-30);
  gen = scalar_gen(162.1, 7.95, 10);
  RngStream rng2(1, 1);
  const MockData exact = generate_mock_dataset(precise, gen, rng2);
  for (std::size_t j = 0; j < exact.thetas_true.size(); ++j) {
    CHECK(std::abs(exact.data.groups[j].y(0) - exact.thetas_true[j](0)) <
          1e-10);
  }
}

TEST_CASE("generate_mock_dataset: generative variance is reproduced") {
  const Dataset tmpl = eight_schools();
  const GenerativeConfig gen = scalar_gen(162.1, 7.95, 1);
  RngStream rng(2, 0);
  const int n = 10000;
  std::vector<double> first_thetas(n);
  for (int i = 0; i < n; ++i) {
    first_thetas[i] = generate_mock_dataset(tmpl, gen, rng).thetas_true[0](0);
  }
  CHECK(oracle::variance(first_thetas) ==
        doctest::Approx(162.1).epsilon(0.05));
  CHECK(oracle::mean(first_thetas) ==
        doctest::Approx(7.95).epsilon(3.0 * std::sqrt(162.1 / n) / 7.95));
}

TEST_CASE("coverage_indicator: product of strict component indicators") {
  const std::vector<Interval> intervals{{-1.0, 1.0}, {0.0, 2.0}};
  CHECK(coverage_indicator(Eigen::Vector2d(0.5, 1.0), intervals) == 1);
  CHECK(coverage_indicator(Eigen::Vector2d(0.5, 2.5), intervals) == 0);
  CHECK(coverage_indicator(Eigen::Vector2d(-1.5, 1.0), intervals) == 0);
  // Endpoints do not count (open intervals).
  CHECK(coverage_indicator(Eigen::Vector2d(1.0, 1.0), intervals) == 0);
  CHECK(coverage_indicator(Eigen::Vector2d(0.0, 0.0), intervals) == 0);
}

TEST_CASE("rb_coverage_term: closed-form scalar case") {
  // V = 1, A_gen = 1 gives B = 1/2; conditioning on y = 2 with beta_gen = 0
  // makes the conditional N(1, 1/2).
  GroupObservation obs = test_util::scalar_group(2.0, 1.0);
  const GenerativeConfig gen = scalar_gen(1.0, 0.0, 2);
  const double half_width = 1.959964 * std::sqrt(0.5);
  const std::vector<Interval> intervals{{1.0 - half_width, 1.0 + half_width}};
  CHECK(rb_coverage_term(obs, gen, intervals) ==
        doctest::Approx(0.95).epsilon(1e-6));

  const std::vector<Interval> all{
      {-std::numeric_limits<double>::infinity(),
       std::numeric_limits<double>::infinity()}};
  CHECK(rb_coverage_term(obs, gen, all) == 1.0);

  // Degenerate A_gen: point-mass indicator at the regression mean.
  const GenerativeConfig zero = scalar_gen(0.0, 0.5, 2);
  CHECK(rb_coverage_term(obs, zero, {{Interval{0.0, 1.0}}}) == 1.0);
  CHECK(rb_coverage_term(obs, zero, {{Interval{0.6, 1.0}}}) == 0.0);
}

TEST_CASE("rb_coverage_term: bivariate term matches brute-force sampling") {
  RngStream rng(3, 0);
  GroupObservation obs;
  obs.y = Eigen::Vector2d(1.0, -0.5);
  obs.V = test_util::random_spd(2, rng);
  obs.x = Eigen::Vector2d(1.0, 0.4);
  GenerativeConfig gen;
  gen.A_gen = test_util::random_spd(2, rng).matrix();
  gen.beta_gen = test_util::random_vector(4, rng);
  gen.n_sim = 2;
  const std::vector<Interval> intervals{{-1.5, 2.0}, {-2.5, 1.0}};
  const double term = rb_coverage_term(obs, gen, intervals);

  // Brute force: sample the conditional posterior of theta given y.
  const GaussianMoments cond = conditional_theta_moments(
      obs, HyperState{SpdMatrix(gen.A_gen), gen.beta_gen});
  const int n = 1000000;
  long hits = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd draw = sample_mvn(cond, rng);
    hits += (draw(0) > intervals[0].low && draw(0) < intervals[0].upp &&
             draw(1) > intervals[1].low && draw(1) < intervals[1].upp);
  }
  const double estimate = static_cast<double>(hits) / n;
  const double se = std::sqrt(term * (1.0 - term) / n);
  CHECK(std::abs(estimate - term) < 3.0 * se);
}

TEST_CASE("derive_cell_seeds: data streams shared across priors") {
  const CellSeeds a = derive_cell_seeds(7, 0, 3);
  const CellSeeds b = derive_cell_seeds(7, 4, 3);
  CHECK(a.data_seed == b.data_seed);
  CHECK(a.chain_seed != b.chain_seed);
  CHECK(derive_cell_seeds(7, 0, 2).data_seed != a.data_seed);
  CHECK(derive_cell_seeds(8, 0, 3).data_seed != a.data_seed);
  // Pure function of its inputs.
  CHECK(derive_cell_seeds(7, 4, 3).chain_seed == b.chain_seed);
}

TEST_CASE("evaluate_cell: variance formula needs n_sim >= 2") {
  const Dataset tmpl = eight_schools();
  const PriorSpec prior = PriorSpec::usp(v0_harmonic_mean(tmpl), "usp-dm");
  const GenerativeConfig gen = scalar_gen(162.1, 7.95, 1);
  CHECK_THROWS_AS(
      evaluate_cell(tmpl, prior, gen, tiny_chain(), std::uint64_t{1}),
      DomainError);
}

TEST_CASE("evaluate_cell: aggregate identities and estimator bounds") {
  const Dataset tmpl = eight_schools();
  const PriorSpec prior = PriorSpec::usp(v0_harmonic_mean(tmpl), "usp-dm");
  const GenerativeConfig gen = scalar_gen(397.9, 7.95, 24);
  const CoverageResult r =
      evaluate_cell(tmpl, prior, gen, tiny_chain(), std::uint64_t{5});

  CHECK(r.per_group_rb.size() == 8);
  CHECK(r.overall_rb == doctest::Approx(r.per_group_rb.mean()).epsilon(1e-15));
  CHECK(r.overall_rb_var ==
        doctest::Approx(r.per_group_rb_var.sum() / 64.0).epsilon(1e-15));
  for (Eigen::Index j = 0; j < 8; ++j) {
    CHECK(r.per_group_rb(j) >= 0.0);
    CHECK(r.per_group_rb(j) <= 1.0);
    // Never above the binomial variance bound at the estimated rate.
    const double p_hat = r.per_group_rb(j);
    CHECK(r.per_group_rb_var(j) <=
          p_hat * (1.0 - p_hat) / (gen.n_sim - 1.0) + 1e-12);
  }

  // Rao-Blackwellization: across-simulation variance never increases, and
  // both estimators agree within sampling error.
  CHECK(r.rb_sim_variance <= r.naive_sim_variance + 1e-15);
  const double combined = std::sqrt(
      r.overall_rb_var + r.naive_sim_variance / static_cast<double>(r.n_sim));
  CHECK(std::abs(r.overall_rb - r.overall_naive) <= 4.0 * combined);
}

TEST_CASE("evaluate_cell: bit-identical across thread counts") {
  const Dataset tmpl = eight_schools();
  const PriorSpec prior = PriorSpec::improper_flat();
  const GenerativeConfig gen = scalar_gen(108.5, 7.95, 12);
  const CellSeeds seeds = derive_cell_seeds(9, 0, 0);
  const CoverageResult serial =
      evaluate_cell(tmpl, prior, gen, tiny_chain(), seeds, 0.95, 1);
  const CoverageResult threaded =
      evaluate_cell(tmpl, prior, gen, tiny_chain(), seeds, 0.95, 4);
  CHECK(serial.per_group_rb == threaded.per_group_rb);
  CHECK(serial.per_group_rb_var == threaded.per_group_rb_var);
  CHECK(serial.per_group_naive == threaded.per_group_naive);
  CHECK(serial.overall_rb == threaded.overall_rb);
  CHECK(serial.mean_acceptance == threaded.mean_acceptance);
}

TEST_CASE("evaluate_cell: raising the level never lowers RB estimates") {
  const Dataset tmpl = eight_schools();
  const PriorSpec prior = PriorSpec::usp(v0_harmonic_mean(tmpl), "usp-dm");
  const GenerativeConfig gen = scalar_gen(246.3, 7.95, 10);
  const CellSeeds seeds = derive_cell_seeds(11, 0, 0);
  const CoverageResult narrow =
      evaluate_cell(tmpl, prior, gen, tiny_chain(), seeds, 0.90, 1);
  const CoverageResult wide =
      evaluate_cell(tmpl, prior, gen, tiny_chain(), seeds, 0.95, 1);
  for (Eigen::Index j = 0; j < 8; ++j) {
    CHECK(wide.per_group_rb(j) >= narrow.per_group_rb(j));
  }
}

TEST_CASE("univariate_generative_grid: reference grid") {
  const std::vector<double> b0 = {0.05, 0.15, 0.25, 0.35, 0.45,
                                  0.55, 0.65, 0.75, 0.85, 0.95};
  const std::vector<double> expected = {2520.2, 751.7, 397.9, 246.3, 162.1,
                                        108.5,  71.4,  44.2,  23.4,  7.0};
  const double v0 = v0_harmonic_mean(eight_schools())(0, 0);
  const auto grid = univariate_generative_grid(
      v0, b0, Eigen::VectorXd::Constant(1, 7.95), 1000);
  REQUIRE(grid.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(grid[i].A_gen(0, 0) ==
          doctest::Approx(expected[i]).epsilon(0.1 / expected[i]));
    CHECK(v0 / (v0 + grid[i].A_gen(0, 0)) ==
          doctest::Approx(b0[i]).epsilon(1e-10));
    CHECK(grid[i].n_sim == 1000);
    CHECK(grid[i].b0 == b0[i]);
  }

  const auto boundary = univariate_generative_grid(
      v0, std::vector<double>{1.0}, Eigen::VectorXd::Constant(1, 7.95), 10);
  CHECK(boundary[0].A_gen(0, 0) == 0.0);
  CHECK(boundary[0].a_gen_is_zero());
}

TEST_CASE("bivariate_generative_grid: determinant targets") {
  const SpdMatrix sigma = hospital_pooled_sigma();
  const std::vector<double> u = {0.29, 0.63, 1.00, 1.45, 2.04,
                                 2.87, 4.16, 6.47, 11.82, 38.50};
  const Eigen::VectorXd beta_gen = hospital_beta_gen();
  const auto grid = bivariate_generative_grid(sigma, u, beta_gen, 1000);
  REQUIRE(grid.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    const Eigen::MatrixXd b =
        sigma.matrix() *
        (sigma.matrix() + grid[i].A_gen).inverse();  // oracle route
    CHECK(b.determinant() ==
          doctest::Approx(0.05 + 0.1 * static_cast<double>(i)).epsilon(0.02));
  }
  const auto unit = bivariate_generative_grid(
      sigma, std::vector<double>{1.0}, beta_gen, 10);
  CHECK((unit[0].A_gen - sigma.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  const auto tiny = bivariate_generative_grid(
      sigma, std::vector<double>{1e9}, beta_gen, 10);
  CHECK(tiny[0].A_gen.cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(
      bivariate_generative_grid(sigma, std::vector<double>{-1.0}, beta_gen, 10),
      DomainError);
}

TEST_CASE("run_campaign: cell grid, failures and parallel determinism") {
  const Dataset tmpl = eight_schools();
  const std::vector<PriorSpec> priors = {
      PriorSpec::usp(v0_harmonic_mean(tmpl), "usp-dm", 1.0),
      PriorSpec::improper_flat()};
  std::vector<GenerativeConfig> grid = {scalar_gen(397.9, 7.95, 8, "B0=0.25"),
                                        scalar_gen(108.5, 7.95, 8, "B0=0.55")};
  grid[0].b0 = 0.25;
  grid[1].b0 = 0.55;

  const CampaignResult serial =
      run_campaign(tmpl, priors, grid, tiny_chain(), 21, 1);
  CHECK(serial.failures.empty());
  CHECK(serial.flattened().size() == 4);

  const CampaignResult parallel =
      run_campaign(tmpl, priors, grid, tiny_chain(), 21, 3);
  for (std::size_t pi = 0; pi < 2; ++pi) {
    for (std::size_t gi = 0; gi < 2; ++gi) {
      REQUIRE(serial.cells[pi][gi].has_value());
      REQUIRE(parallel.cells[pi][gi].has_value());
      CHECK(serial.cells[pi][gi]->per_group_rb ==
            parallel.cells[pi][gi]->per_group_rb);
      CHECK(serial.cells[pi][gi]->overall_rb ==
            parallel.cells[pi][gi]->overall_rb);
    }
  }
  // Matched mock data across priors at the same grid point.
  CHECK(serial.cells[0][0]->data_seed == serial.cells[1][0]->data_seed);
  CHECK(serial.cells[0][0]->chain_seed != serial.cells[1][0]->chain_seed);

  // A broken cell is collected and the campaign continues.
  grid.push_back(scalar_gen(44.2, 7.95, 1, "broken"));
  const CampaignResult partial =
      run_campaign(tmpl, priors, grid, tiny_chain(), 21, 2);
  CHECK(partial.failures.size() == 2);  // both priors fail on n_sim = 1
  CHECK(partial.flattened().size() == 4);
  for (const auto& failure : partial.failures) {
    CHECK(failure.grid_index == 2);
    CHECK_FALSE(failure.message.empty());
  }
}

TEST_CASE("run_campaign: rejects empty inputs") {
  const Dataset tmpl = eight_schools();
  const std::vector<PriorSpec> priors = {PriorSpec::improper_flat()};
  const std::vector<GenerativeConfig> grid;
  CHECK_THROWS_AS(run_campaign(tmpl, priors, grid, tiny_chain(), 1, 1),
                  ConfigError);
}
