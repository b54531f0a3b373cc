#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uspcov/model.hpp"
#include "uspcov/stochastics.hpp"

namespace uspcov {

enum class InitTheta { Data, Explicit };
enum class InitBeta { PooledMean, Generative, Explicit };
enum class InitA { V0Based, Explicit };
enum class AUpdate { MetropolisHastings, FlatExactGibbs };

/// Chain length, proposal tuning and initialization rules.
///
/// Defaults match the reference setup: 42000 sweeps, 2000 burn-in, keep
/// every other retained draw (20000 kept), log-scale random-walk sd 2 for
/// scalar A, inverse-Wishart proposal with 40 degrees of freedom for matrix
/// A. Initialization: theta at the data, beta at the pooled fit, A at the
/// prior's shape matrix (harmonic mean fallback for the flat prior).
struct SamplerConfig {
  int total_iterations = 42000;
  int burn_in = 2000;
  int thin = 2;
  double proposal_sigma = 2.0;
  double proposal_nu = 40.0;
  InitTheta init_theta = InitTheta::Data;
  std::vector<Eigen::VectorXd> theta0;
  InitBeta init_beta = InitBeta::PooledMean;
  std::optional<Eigen::VectorXd> beta0;
  InitA init_a = InitA::V0Based;
  std::optional<SpdMatrix> a0;
  AUpdate a_update = AUpdate::MetropolisHastings;
  bool compute_diagnostics = true;

  int kept_draws() const { return (total_iterations - burn_in) / thin; }
  void validate() const;
};

/// Thinned post-burn-in draws plus chain diagnostics. Retained sweeps are
/// burn_in + thin, burn_in + 2*thin, ..., total_iterations; the acceptance
/// rate counts every A proposal including burn-in.
struct PosteriorSamples {
  std::vector<Eigen::MatrixXd> theta_draws;  // one p x kept matrix per group
  std::vector<SpdMatrix> A_draws;
  Eigen::MatrixXd beta_draws;  // mp x kept
  double acceptance_rate = 0.0;
  long proposal_failures = 0;
  std::map<std::string, double> ess_per_parameter;

  Eigen::Index kept() const { return beta_draws.cols(); }
  Chain theta_chain(Eigen::Index group, Eigen::Index component = 0) const;
  Chain beta_chain(Eigen::Index i) const;
  Chain a_chain(Eigen::Index r = 0, Eigen::Index c = 0) const;
};

/// One sweep of the k group-level conditionals: independent draws from
/// conditional_theta_moments for each group.
std::vector<Eigen::VectorXd> gibbs_update_theta(const Dataset& data,
                                                const HyperState& state,
                                                RngStream& rng);

/// One draw from conditional_beta_moments.
Eigen::VectorXd gibbs_update_beta(const Dataset& data,
                                  const std::vector<Eigen::VectorXd>& thetas,
                                  const SpdMatrix& A, RngStream& rng);

struct UnivariateMhResult {
  double value;
  bool accepted;
};

/// Random-walk Metropolis-Hastings step for scalar A on the log scale:
/// propose log A* ~ N(log A, sigma^2) and accept with probability
/// min[1, pi_c(A*)/pi_c(A) * A*/A] (the last factor is the Jacobian of the
/// log transform).
UnivariateMhResult mh_update_A_univariate(
    double current_a, const Dataset& data,
    std::span<const Eigen::VectorXd> thetas, const Eigen::VectorXd& beta,
    const PriorSpec& prior, double sigma, RngStream& rng);

struct MultivariateMhResult {
  SpdMatrix value;
  bool accepted;
  int proposal_failures;
};

/// Metropolis-Hastings step for matrix A with an inverse-Wishart proposal
/// IW(nu, (nu+p+1) A) whose mode is the current value; the acceptance
/// probability carries the proposal density ratio. A proposal that fails
/// validation is retried up to 100 times, then the step rejects.
MultivariateMhResult mh_update_A_multivariate(
    const SpdMatrix& current_a, const Dataset& data,
    std::span<const Eigen::VectorXd> thetas, const Eigen::VectorXd& beta,
    const PriorSpec& prior, double nu, RngStream& rng);

/// Exact conditional draw of A under the improper flat prior:
/// IW(k - p - 1, S) with S the residual scatter. Used as a cross-check path
/// for the Metropolis-Hastings update.
SpdMatrix gibbs_update_A_flat_exact(const Dataset& data,
                                    std::span<const Eigen::VectorXd> thetas,
                                    const Eigen::VectorXd& beta,
                                    RngStream& rng);

/// Runs the full Metropolis-Hastings-within-Gibbs chain, sweeping theta,
/// beta, A in that order. Numeric failures are rethrown as ChainError with
/// the iteration index. Output is a deterministic function of
/// (data, prior, config, rng stream).
PosteriorSamples run_chain(const Dataset& data, const PriorSpec& prior,
                           const SamplerConfig& config, RngStream& rng);

/// Equal-tailed interval from the empirical quantiles at
/// (1-level)/2 and 1-(1-level)/2.
Interval posterior_interval(std::span<const double> samples, double level);

/// Ordinary least-squares pooled fit of beta (identity weights); the default
/// chain initialization. Reduces to the grand mean of y for the
/// intercept-only scalar model.
Eigen::VectorXd pooled_mean_beta(const Dataset& data);

}  // namespace uspcov
