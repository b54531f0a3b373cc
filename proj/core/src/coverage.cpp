#include "uspcov/coverage.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>
#include <utility>

namespace uspcov {

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

void GenerativeConfig::validate(Eigen::Index p, Eigen::Index mp) const {
  if (A_gen.rows() != p || A_gen.cols() != p) {
    throw DimensionError("GenerativeConfig '" + label +
                         "': A_gen dimension mismatch");
  }
  if (beta_gen.size() != mp) {
    throw DimensionError("GenerativeConfig '" + label +
                         "': beta_gen length mismatch");
  }
  if (n_sim < 1) {
    throw DomainError("GenerativeConfig '" + label +
                      "': n_sim must be positive");
  }
  if (!a_gen_is_zero()) {
    SpdMatrix check(A_gen);  // throws if not SPD
  }
}

MockData generate_mock_dataset(const Dataset& tmpl, const GenerativeConfig& gen,
                               RngStream& rng) {
  tmpl.validate();
  gen.validate(tmpl.p(), tmpl.m() * tmpl.p());

  MockData out;
  out.data = tmpl;
  out.thetas_true.reserve(tmpl.groups.size());

  std::optional<SpdMatrix> a_spd;
  if (!gen.a_gen_is_zero()) a_spd.emplace(gen.A_gen);

  for (std::size_t j = 0; j < tmpl.groups.size(); ++j) {
    const auto& g = tmpl.groups[j];
    Eigen::VectorXd mean = g.regression_mean(gen.beta_gen);
    Eigen::VectorXd theta =
        a_spd ? sample_mvn(GaussianMoments{mean, *a_spd}, rng)
              : std::move(mean);
    out.data.groups[j].y = sample_mvn(GaussianMoments{theta, g.V}, rng);
    out.thetas_true.push_back(std::move(theta));
  }
  return out;
}

int coverage_indicator(const Eigen::VectorXd& theta_true,
                       std::span<const Interval> intervals) {
  if (static_cast<std::size_t>(theta_true.size()) != intervals.size()) {
    throw DimensionError("coverage_indicator: interval count mismatch");
  }
  for (std::size_t l = 0; l < intervals.size(); ++l) {
    const double v = theta_true(static_cast<Eigen::Index>(l));
    // Open-interval convention: endpoint values do not count as covered.
    if (!(v > intervals[l].low && v < intervals[l].upp)) return 0;
  }
  return 1;
}

double rb_coverage_term(const GroupObservation& obs,
                        const GenerativeConfig& gen,
                        std::span<const Interval> intervals) {
  if (static_cast<std::size_t>(obs.p()) != intervals.size()) {
    throw DimensionError("rb_coverage_term: interval count mismatch");
  }
  if (gen.a_gen_is_zero()) {
    const Eigen::VectorXd point = obs.regression_mean(gen.beta_gen);
    return static_cast<double>(coverage_indicator(point, intervals));
  }
  const GaussianMoments cond = conditional_theta_moments(
      obs, HyperState{SpdMatrix(gen.A_gen), gen.beta_gen});
  Eigen::VectorXd lower(obs.p()), upper(obs.p());
  for (Eigen::Index l = 0; l < obs.p(); ++l) {
    lower(l) = intervals[static_cast<std::size_t>(l)].low;
    upper(l) = intervals[static_cast<std::size_t>(l)].upp;
  }
  return mvn_rectangle_prob(cond, lower, upper);
}

Eigen::VectorXd rb_component_terms(const GroupObservation& obs,
                                   const GenerativeConfig& gen,
                                   std::span<const Interval> intervals) {
  const Eigen::Index p = obs.p();
  if (static_cast<std::size_t>(p) != intervals.size()) {
    throw DimensionError("rb_component_terms: interval count mismatch");
  }
  Eigen::VectorXd terms(p);
  if (gen.a_gen_is_zero()) {
    const Eigen::VectorXd point = obs.regression_mean(gen.beta_gen);
    for (Eigen::Index l = 0; l < p; ++l) {
      const auto& iv = intervals[static_cast<std::size_t>(l)];
      terms(l) = (point(l) > iv.low && point(l) < iv.upp) ? 1.0 : 0.0;
    }
    return terms;
  }
  const GaussianMoments cond = conditional_theta_moments(
      obs, HyperState{SpdMatrix(gen.A_gen), gen.beta_gen});
  for (Eigen::Index l = 0; l < p; ++l) {
    const auto& iv = intervals[static_cast<std::size_t>(l)];
    const double sd = std::sqrt(cond.cov(l, l));
    terms(l) = std_normal_cdf((iv.upp - cond.mean(l)) / sd) -
               std_normal_cdf((iv.low - cond.mean(l)) / sd);
  }
  return terms;
}

CellSeeds derive_cell_seeds(std::uint64_t master_seed, std::size_t prior_index,
                            std::size_t grid_index) {
  return CellSeeds{
      derive_seed(master_seed, {0x0Du, grid_index}),
      derive_seed(master_seed, {0x0Cu, prior_index, grid_index}),
  };
}

CoverageResult evaluate_cell(const Dataset& tmpl, const PriorSpec& prior,
                             const GenerativeConfig& gen,
                             const SamplerConfig& chain_config,
                             CellSeeds seeds, double level, int threads) {
  tmpl.validate();
  const Eigen::Index k = tmpl.k();
  const Eigen::Index p = tmpl.p();
  const Eigen::Index m = tmpl.m();
  gen.validate(p, m * p);
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("evaluate_cell: level must lie in (0, 1)");
  }
  if (gen.n_sim < 2) {
    throw DomainError(
        "evaluate_cell: n_sim must be at least 2 (the variance estimate "
        "divides by n_sim - 1)");
  }
  if (!propriety_check(k, p, m)) {
    throw DomainError("evaluate_cell: improper posterior, needs k > p + m + 1");
  }

  SamplerConfig config = chain_config;
  config.compute_diagnostics = false;  // per-simulation ESS is never consumed
  if (config.init_beta == InitBeta::Generative) {
    config.init_beta = InitBeta::Explicit;
    config.beta0 = gen.beta_gen;
  }
  config.validate();

  const int n_sim = gen.n_sim;
  Eigen::MatrixXd comp_terms(n_sim, k);
  Eigen::MatrixXd comp_naive(n_sim, k);
  Eigen::MatrixXd joint_terms(n_sim, k);
  Eigen::MatrixXd joint_naive(n_sim, k);
  Eigen::VectorXd acceptance(n_sim);
  std::vector<std::string> errors(static_cast<std::size_t>(n_sim));

  const auto simulate = [&](int i) {
    RngStream data_rng(seeds.data_seed, static_cast<std::uint64_t>(i));
    const MockData mock = generate_mock_dataset(tmpl, gen, data_rng);
    RngStream chain_rng(seeds.chain_seed, static_cast<std::uint64_t>(i));
    const PosteriorSamples draws =
        run_chain(mock.data, prior, config, chain_rng);

    std::vector<Interval> intervals(static_cast<std::size_t>(p));
    std::vector<double> component(static_cast<std::size_t>(draws.kept()));
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& theta = draws.theta_draws[static_cast<std::size_t>(j)];
      const auto& theta_true =
          mock.thetas_true[static_cast<std::size_t>(j)];
      // Conditioning is on the realized mock data, not the template's y.
      const auto& mock_obs = mock.data.groups[static_cast<std::size_t>(j)];
      for (Eigen::Index l = 0; l < p; ++l) {
        for (Eigen::Index t = 0; t < theta.cols(); ++t) {
          component[static_cast<std::size_t>(t)] = theta(l, t);
        }
        intervals[static_cast<std::size_t>(l)] =
            posterior_interval(component, level);
      }
      joint_naive(i, j) = coverage_indicator(theta_true, intervals);
      joint_terms(i, j) = rb_coverage_term(mock_obs, gen, intervals);
      comp_terms(i, j) = rb_component_terms(mock_obs, gen, intervals).mean();
      double covered = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        const auto& iv = intervals[static_cast<std::size_t>(l)];
        covered += (theta_true(l) > iv.low && theta_true(l) < iv.upp);
      }
      comp_naive(i, j) = covered / static_cast<double>(p);
    }
    acceptance(i) = draws.acceptance_rate;
  };

  const int workers = std::max(1, threads);
  if (workers == 1) {
    for (int i = 0; i < n_sim; ++i) {
      try {
        simulate(i);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < n_sim; i = next.fetch_add(1)) {
          try {
            simulate(i);
          } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  // Every matrix slot was written exactly once for each i, so the estimates
  // are the same whatever the thread count.
  for (int i = 0; i < n_sim; ++i) {
    if (!errors[static_cast<std::size_t>(i)].empty()) {
      throw ChainError("evaluate_cell: simulation " + std::to_string(i) +
                       " failed: " + errors[static_cast<std::size_t>(i)]);
    }
  }

  CoverageResult result;
  const double n = static_cast<double>(n_sim);
  const auto per_group_variance = [&](const Eigen::MatrixXd& values,
                                      const Eigen::VectorXd& means) {
    Eigen::VectorXd var(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      double ss = 0.0;
      for (int i = 0; i < n_sim; ++i) {
        const double d = values(i, j) - means(j);
        ss += d * d;
      }
      var(j) = ss / (n * (n - 1.0));
    }
    return var;
  };
  const auto sample_variance = [n](const Eigen::VectorXd& v) {
    const double mean = v.mean();
    return (v.array() - mean).square().sum() / (n - 1.0);
  };

  result.per_group_rb = comp_terms.colwise().mean();
  result.per_group_naive = comp_naive.colwise().mean();
  result.per_group_rb_var = per_group_variance(comp_terms, result.per_group_rb);
  result.overall_rb = result.per_group_rb.mean();
  result.overall_rb_var =
      result.per_group_rb_var.sum() / static_cast<double>(k * k);
  result.overall_naive = result.per_group_naive.mean();
  result.rb_sim_variance = sample_variance(comp_terms.rowwise().mean());
  result.naive_sim_variance = sample_variance(comp_naive.rowwise().mean());

  result.per_group_joint_rb = joint_terms.colwise().mean();
  result.per_group_joint_naive = joint_naive.colwise().mean();
  result.per_group_joint_rb_var =
      per_group_variance(joint_terms, result.per_group_joint_rb);
  result.overall_joint_rb = result.per_group_joint_rb.mean();
  result.overall_joint_rb_var =
      result.per_group_joint_rb_var.sum() / static_cast<double>(k * k);
  result.overall_joint_naive = result.per_group_joint_naive.mean();
  result.joint_rb_sim_variance = sample_variance(joint_terms.rowwise().mean());
  result.joint_naive_sim_variance =
      sample_variance(joint_naive.rowwise().mean());

  result.mean_acceptance = acceptance.mean();
  result.level = level;
  result.prior_label = prior.label();
  result.prior_delta = prior.delta();
  result.generative_label = gen.label;
  result.b0 = gen.b0;
  result.n_sim = n_sim;
  result.data_seed = seeds.data_seed;
  result.chain_seed = seeds.chain_seed;
  result.chain_config = config;
  return result;
}

CoverageResult evaluate_cell(const Dataset& tmpl, const PriorSpec& prior,
                             const GenerativeConfig& gen,
                             const SamplerConfig& chain_config,
                             std::uint64_t master_seed, double level,
                             int threads) {
  return evaluate_cell(tmpl, prior, gen, chain_config,
                       derive_cell_seeds(master_seed, 0, 0), level, threads);
}

std::vector<GenerativeConfig> univariate_generative_grid(
    double v0, std::span<const double> b0_list, const Eigen::VectorXd& beta_gen,
    int n_sim) {
  std::vector<GenerativeConfig> grid;
  grid.reserve(b0_list.size());
  for (double b0 : b0_list) {
    const double a = b0_to_A_univariate(b0, v0);
    GenerativeConfig gen;
    gen.A_gen = Eigen::MatrixXd::Constant(1, 1, a);
    gen.beta_gen = beta_gen;
    gen.n_sim = n_sim;
    gen.label = "B0=" + format_number(b0);
    gen.b0 = b0;
    grid.push_back(std::move(gen));
  }
  return grid;
}

std::vector<GenerativeConfig> bivariate_generative_grid(
    const SpdMatrix& sigma, std::span<const double> u_list,
    const Eigen::VectorXd& beta_gen, int n_sim) {
  std::vector<GenerativeConfig> grid;
  grid.reserve(u_list.size());
  for (double u : u_list) {
    if (!(u > 0.0)) {
      throw DomainError("bivariate_generative_grid: u must be positive");
    }
    GenerativeConfig gen;
    gen.A_gen = sigma.matrix() / u;
    gen.beta_gen = beta_gen;
    gen.n_sim = n_sim;
    gen.label = "u=" + format_number(u);
    gen.b0 = std::pow(u / (1.0 + u), static_cast<double>(sigma.dim()));
    grid.push_back(std::move(gen));
  }
  return grid;
}

std::vector<CoverageResult> CampaignResult::flattened() const {
  std::vector<CoverageResult> flat;
  for (const auto& row : cells) {
    for (const auto& cell : row) {
      if (cell) flat.push_back(*cell);
    }
  }
  return flat;
}

CampaignResult run_campaign(const Dataset& tmpl,
                            std::span<const PriorSpec> priors,
                            std::span<const GenerativeConfig> grid,
                            const SamplerConfig& chain_config,
                            std::uint64_t master_seed, int parallelism,
                            double level) {
  if (priors.empty() || grid.empty()) {
    throw ConfigError("run_campaign: priors and grid must be nonempty");
  }
  CampaignResult campaign;
  campaign.cells.resize(priors.size());
  for (std::size_t pi = 0; pi < priors.size(); ++pi) {
    campaign.cells[pi].resize(grid.size());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      try {
        campaign.cells[pi][gi] = evaluate_cell(
            tmpl, priors[pi], grid[gi], chain_config,
            derive_cell_seeds(master_seed, pi, gi), level, parallelism);
      } catch (const std::exception& e) {
        campaign.failures.push_back(CellFailure{pi, gi, e.what()});
      }
    }
  }
  return campaign;
}

}  // namespace uspcov
