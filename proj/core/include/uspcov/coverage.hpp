#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uspcov/sampler.hpp"

namespace uspcov {

/// One generative cell of the repeated-sampling evaluation: the truth
/// (A_gen, beta_gen) used to simulate random effects and data, and the number
/// of simulated datasets. A_gen is SPD or exactly zero (degenerate boundary
/// where every theta_j equals its regression mean).
struct GenerativeConfig {
  Eigen::MatrixXd A_gen;
  Eigen::VectorXd beta_gen;
  int n_sim = 1000;
  std::string label;
  double b0 = std::numeric_limits<double>::quiet_NaN();  // reference shrinkage

  bool a_gen_is_zero() const { return A_gen.isZero(0.0); }
  void validate(Eigen::Index p, Eigen::Index mp) const;
};

struct MockData {
  std::vector<Eigen::VectorXd> thetas_true;
  Dataset data;
};

/// Simulates one mock dataset from the two-level model: theta_j from
/// N_p(X_j^T beta_gen, A_gen), then y_j from N_p(theta_j, V_j). The template's
/// covariances and covariates are reused unchanged.
MockData generate_mock_dataset(const Dataset& tmpl, const GenerativeConfig& gen,
                               RngStream& rng);

/// 1 iff every component of theta_true lies strictly inside its interval.
int coverage_indicator(const Eigen::VectorXd& theta_true,
                       std::span<const Interval> intervals);

/// Rao-Blackwellized coverage term: the exact conditional probability that
/// the random effect lies in the given rectangle, P(theta in rectangle |
/// A_gen, beta_gen, y_j), from the conditional posterior moments under the
/// generative state. The realized true theta never enters; only the data and
/// the intervals do. A zero A_gen degenerates to a point-mass indicator at
/// the regression mean.
double rb_coverage_term(const GroupObservation& obs,
                        const GenerativeConfig& gen,
                        std::span<const Interval> intervals);

/// Componentwise Rao-Blackwellized terms: for each component l, the marginal
/// conditional probability P(theta_l in interval_l | A_gen, beta_gen, y_j).
/// Their mean is the RB estimate of per-component coverage, the headline
/// summary; rb_coverage_term is the all-components-jointly counterpart.
Eigen::VectorXd rb_component_terms(const GroupObservation& obs,
                                   const GenerativeConfig& gen,
                                   std::span<const Interval> intervals);

struct CellSeeds {
  std::uint64_t data_seed;
  std::uint64_t chain_seed;
};

/// Seed discipline: data streams depend only on (master, grid point) so that
/// priors compared at the same grid point see identical mock data; chain
/// streams add the prior index. Simulation i consumes stream_id = i of each,
/// so results do not depend on scheduling.
CellSeeds derive_cell_seeds(std::uint64_t master_seed, std::size_t prior_index,
                            std::size_t grid_index);

/// Per-group Rao-Blackwellized coverage estimates with their variance
/// estimates, the naive indicator means, and the overall aggregate
/// (mean over groups; variance = mean of variances / k).
///
/// Two estimator families are carried. The headline per_group_rb/overall_rb
/// track per-component coverage (each component's interval checked on its
/// own, averaged over the p components). The joint_* fields track the
/// stricter all-components-simultaneously event (the product indicator and
/// the full-rectangle conditional probability). For p = 1 the families
/// coincide.
struct CoverageResult {
  Eigen::VectorXd per_group_rb;
  Eigen::VectorXd per_group_rb_var;
  Eigen::VectorXd per_group_naive;
  double overall_rb = 0.0;
  double overall_rb_var = 0.0;
  double overall_naive = 0.0;
  Eigen::VectorXd per_group_joint_rb;
  Eigen::VectorXd per_group_joint_rb_var;
  Eigen::VectorXd per_group_joint_naive;
  double overall_joint_rb = 0.0;
  double overall_joint_rb_var = 0.0;
  double overall_joint_naive = 0.0;
  // Across-simulation variances of the per-simulation group-averaged RB terms
  // and naive indicators (the Rao-Blackwell dominance comparison), for each
  // family.
  double rb_sim_variance = 0.0;
  double naive_sim_variance = 0.0;
  double joint_rb_sim_variance = 0.0;
  double joint_naive_sim_variance = 0.0;
  double mean_acceptance = 0.0;
  double level = 0.95;
  std::string prior_label;
  std::optional<double> prior_delta;
  std::string generative_label;
  double b0 = std::numeric_limits<double>::quiet_NaN();
  int n_sim = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t chain_seed = 0;
  SamplerConfig chain_config;

  double overall_rb_se() const { return std::sqrt(overall_rb_var); }
  double overall_joint_rb_se() const { return std::sqrt(overall_joint_rb_var); }
};

/// Runs one coverage cell: n_sim simulated datasets, a full chain fit on
/// each, per-component posterior intervals at the given level, and the RB /
/// naive accumulations. Simulations run on `threads` workers; the result is
/// bit-identical for any thread count. Any chain failure aborts the cell
/// with the smallest failing simulation index.
CoverageResult evaluate_cell(const Dataset& tmpl, const PriorSpec& prior,
                             const GenerativeConfig& gen,
                             const SamplerConfig& chain_config,
                             CellSeeds seeds, double level = 0.95,
                             int threads = 1);
CoverageResult evaluate_cell(const Dataset& tmpl, const PriorSpec& prior,
                             const GenerativeConfig& gen,
                             const SamplerConfig& chain_config,
                             std::uint64_t master_seed, double level = 0.95,
                             int threads = 1);

/// Grid of generative cells from reference shrinkage values b0 in (0, 1]:
/// A_gen = (1 - b0) v0 / b0.
std::vector<GenerativeConfig> univariate_generative_grid(
    double v0, std::span<const double> b0_list, const Eigen::VectorXd& beta_gen,
    int n_sim);

/// Grid of generative cells A_gen = Sigma / u for u > 0; the reference
/// shrinkage determinant is (u / (1 + u))^p.
std::vector<GenerativeConfig> bivariate_generative_grid(
    const SpdMatrix& sigma, std::span<const double> u_list,
    const Eigen::VectorXd& beta_gen, int n_sim);

struct CellFailure {
  std::size_t prior_index = 0;
  std::size_t grid_index = 0;
  std::string message;
};

struct CampaignResult {
  // cells[prior_index][grid_index]; nullopt where the cell failed.
  std::vector<std::vector<std::optional<CoverageResult>>> cells;
  std::vector<CellFailure> failures;

  std::vector<CoverageResult> flattened() const;
};

/// Evaluates every (prior, grid point) cell. Per-cell failures are collected
/// and the campaign continues. Results are independent of the parallelism
/// degree.
CampaignResult run_campaign(const Dataset& tmpl,
                            std::span<const PriorSpec> priors,
                            std::span<const GenerativeConfig> grid,
                            const SamplerConfig& chain_config,
                            std::uint64_t master_seed, int parallelism,
                            double level = 0.95);

}  // namespace uspcov
