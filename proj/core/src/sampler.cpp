#include "uspcov/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace uspcov {

void SamplerConfig::validate() const {
  if (total_iterations < 1) {
    throw ConfigError("SamplerConfig: total_iterations must be positive");
  }
  if (burn_in < 0 || burn_in >= total_iterations) {
    throw ConfigError("SamplerConfig: burn_in must lie in [0, total)");
  }
  if (thin < 1) {
    throw ConfigError("SamplerConfig: thin must be positive");
  }
  if ((total_iterations - burn_in) % thin != 0) {
    throw ConfigError(
        "SamplerConfig: (total_iterations - burn_in) must be divisible by "
        "thin");
  }
  if (!(proposal_sigma > 0.0)) {
    throw ConfigError("SamplerConfig: proposal_sigma must be positive");
  }
  if (init_theta == InitTheta::Explicit && theta0.empty()) {
    throw ConfigError("SamplerConfig: explicit theta initialization is empty");
  }
  if (init_beta == InitBeta::Explicit && !beta0.has_value()) {
    throw ConfigError("SamplerConfig: explicit beta initialization is unset");
  }
  if (init_a == InitA::Explicit && !a0.has_value()) {
    throw ConfigError("SamplerConfig: explicit A initialization is unset");
  }
}

Chain PosteriorSamples::theta_chain(Eigen::Index group,
                                    Eigen::Index component) const {
  const auto& draws = theta_draws.at(static_cast<std::size_t>(group));
  Chain chain(static_cast<std::size_t>(draws.cols()));
  for (Eigen::Index t = 0; t < draws.cols(); ++t) {
    chain[static_cast<std::size_t>(t)] = draws(component, t);
  }
  return chain;
}

Chain PosteriorSamples::beta_chain(Eigen::Index i) const {
  Chain chain(static_cast<std::size_t>(beta_draws.cols()));
  for (Eigen::Index t = 0; t < beta_draws.cols(); ++t) {
    chain[static_cast<std::size_t>(t)] = beta_draws(i, t);
  }
  return chain;
}

Chain PosteriorSamples::a_chain(Eigen::Index r, Eigen::Index c) const {
  Chain chain(A_draws.size());
  for (std::size_t t = 0; t < A_draws.size(); ++t) {
    chain[t] = A_draws[t](r, c);
  }
  return chain;
}

std::vector<Eigen::VectorXd> gibbs_update_theta(const Dataset& data,
                                                const HyperState& state,
                                                RngStream& rng) {
  std::vector<Eigen::VectorXd> thetas;
  thetas.reserve(data.groups.size());
  for (const auto& g : data.groups) {
    thetas.push_back(sample_mvn(conditional_theta_moments(g, state), rng));
  }
  return thetas;
}

Eigen::VectorXd gibbs_update_beta(const Dataset& data,
                                  const std::vector<Eigen::VectorXd>& thetas,
                                  const SpdMatrix& A, RngStream& rng) {
  return sample_mvn(conditional_beta_moments(data, thetas, A), rng);
}

namespace {

// Log conditional density of A given the residual scatter, scalar case,
// evaluated at x = log A and including the log-scale Jacobian. Working in
// logs keeps extreme proposals finite: a proposal that overflows or
// underflows exp() scores -inf and is rejected.
double log_cond_a_from_log(double log_a, double scatter, Eigen::Index k,
                           const PriorSpec& prior) {
  const double a = std::exp(log_a);
  double value = -0.5 * static_cast<double>(k) * log_a -
                 0.5 * scatter * std::exp(-log_a) + log_a;
  if (prior.is_usp()) {
    value += -2.0 * std::log(prior.v0()(0, 0) + a);
  }
  return value;
}

double log_cond_a_matrix(const SpdMatrix& A, const Eigen::MatrixXd& scatter,
                         Eigen::Index k, const PriorSpec& prior) {
  const Eigen::Index p = A.dim();
  double value = -0.5 * static_cast<double>(k * p) *
                     std::log(2.0 * std::numbers::pi) -
                 0.5 * static_cast<double>(k) * A.log_det() -
                 0.5 * A.llt().solve(scatter).trace();
  return value + prior.log_density(A);
}

UnivariateMhResult mh_step_a_univariate(double current_a, double scatter,
                                        Eigen::Index k, const PriorSpec& prior,
                                        double sigma, RngStream& rng) {
  const double log_current = std::log(current_a);
  const double log_proposal = log_current + sigma * rng.normal();
  const double log_ratio =
      log_cond_a_from_log(log_proposal, scatter, k, prior) -
      log_cond_a_from_log(log_current, scatter, k, prior);
  const double u = rng.uniform();
  if (std::log(u) < log_ratio) {
    return {std::exp(log_proposal), true};
  }
  return {current_a, false};
}

MultivariateMhResult mh_step_a_multivariate(const SpdMatrix& current,
                                            const Eigen::MatrixXd& scatter,
                                            Eigen::Index k,
                                            const PriorSpec& prior, double nu,
                                            RngStream& rng) {
  const Eigen::Index p = current.dim();
  const double scale_mult = nu + static_cast<double>(p) + 1.0;

  std::optional<SpdMatrix> proposal;
  int failures = 0;
  for (int attempt = 0; attempt < 100 && !proposal; ++attempt) {
    try {
      proposal = sample_inverse_wishart(
          nu, SpdMatrix(scale_mult * current.matrix()), rng);
    } catch (const NotPositiveDefiniteError&) {
      ++failures;
    }
  }
  if (!proposal) {
    return {current, false, failures};
  }

  const double log_ratio =
      log_cond_a_matrix(*proposal, scatter, k, prior) -
      log_cond_a_matrix(current, scatter, k, prior) +
      log_inverse_wishart_density(
          current, nu, SpdMatrix(scale_mult * proposal->matrix())) -
      log_inverse_wishart_density(
          *proposal, nu, SpdMatrix(scale_mult * current.matrix()));
  const double u = rng.uniform();
  if (std::log(u) < log_ratio) {
    return {std::move(*proposal), true, failures};
  }
  return {current, false, failures};
}

double quantile_of_sorted(const std::vector<double>& sorted, double q) {
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double w = h - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

UnivariateMhResult mh_update_A_univariate(
    double current_a, const Dataset& data,
    std::span<const Eigen::VectorXd> thetas, const Eigen::VectorXd& beta,
    const PriorSpec& prior, double sigma, RngStream& rng) {
  if (!(current_a > 0.0)) {
    throw DomainError("mh_update_A_univariate: current A must be positive");
  }
  if (data.p() != 1) {
    throw DimensionError("mh_update_A_univariate: requires p = 1");
  }
  const double scatter =
      residual_scatter(std::span(data.groups), thetas, beta)(0, 0);
  return mh_step_a_univariate(current_a, scatter, data.k(), prior, sigma, rng);
}

MultivariateMhResult mh_update_A_multivariate(
    const SpdMatrix& current_a, const Dataset& data,
    std::span<const Eigen::VectorXd> thetas, const Eigen::VectorXd& beta,
    const PriorSpec& prior, double nu, RngStream& rng) {
  if (current_a.dim() != data.p()) {
    throw DimensionError("mh_update_A_multivariate: dimension mismatch");
  }
  const Eigen::MatrixXd scatter =
      residual_scatter(std::span(data.groups), thetas, beta);
  return mh_step_a_multivariate(current_a, scatter, data.k(), prior, nu, rng);
}

SpdMatrix gibbs_update_A_flat_exact(const Dataset& data,
                                    std::span<const Eigen::VectorXd> thetas,
                                    const Eigen::VectorXd& beta,
                                    RngStream& rng) {
  const Eigen::Index k = data.k();
  const Eigen::Index p = data.p();
  const double nu = static_cast<double>(k - p - 1);
  Eigen::MatrixXd scatter =
      residual_scatter(std::span(data.groups), thetas, beta);
  SpdMatrix scatter_spd(std::move(scatter));  // throws if S is singular
  return sample_inverse_wishart(nu, scatter_spd, rng);
}

Eigen::VectorXd pooled_mean_beta(const Dataset& data) {
  const Eigen::Index mp = data.m() * data.p();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(mp, mp);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mp);
  for (const auto& g : data.groups) {
    const Eigen::MatrixXd design = g.block_design();
    gram.noalias() += design * design.transpose();
    rhs.noalias() += design * g.y;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw SingularDesignError("pooled_mean_beta: rank-deficient design");
  }
  return llt.solve(rhs);
}

PosteriorSamples run_chain(const Dataset& data, const PriorSpec& prior,
                           const SamplerConfig& config, RngStream& rng) {
  data.validate();
  config.validate();
  const Eigen::Index k = data.k();
  const Eigen::Index p = data.p();
  const Eigen::Index m = data.m();
  const Eigen::Index mp = m * p;

  if (!propriety_check(k, p, m)) {
    throw DomainError("run_chain: improper posterior, needs k > p + m + 1 (k=" +
                      std::to_string(k) + ", p=" + std::to_string(p) +
                      ", m=" + std::to_string(m) + ")");
  }
  if (prior.is_usp() && prior.v0().dim() != p) {
    throw DimensionError("run_chain: prior shape matrix dimension mismatch");
  }
  if (config.a_update == AUpdate::FlatExactGibbs && !prior.is_flat()) {
    throw ConfigError(
        "run_chain: the exact conditional A update requires the flat prior");
  }

  // Initialization.
  std::vector<Eigen::VectorXd> thetas;
  if (config.init_theta == InitTheta::Data) {
    thetas.reserve(data.groups.size());
    for (const auto& g : data.groups) thetas.push_back(g.y);
  } else {
    if (static_cast<Eigen::Index>(config.theta0.size()) != k) {
      throw ConfigError("run_chain: theta0 must have one vector per group");
    }
    thetas = config.theta0;
  }

  Eigen::VectorXd beta;
  switch (config.init_beta) {
    case InitBeta::PooledMean:
      beta = pooled_mean_beta(data);
      break;
    case InitBeta::Generative:
      throw ConfigError(
          "run_chain: generative beta initialization is resolved by the "
          "coverage driver; pass an explicit beta0 instead");
    case InitBeta::Explicit:
      beta = *config.beta0;
      break;
  }
  if (beta.size() != mp) {
    throw DimensionError("run_chain: beta initialization has length " +
                         std::to_string(beta.size()) + ", expected " +
                         std::to_string(mp));
  }

  SpdMatrix A;
  if (config.init_a == InitA::V0Based) {
    A = prior.is_usp() ? prior.v0() : v0_harmonic_mean(data);
  } else {
    A = *config.a0;
  }
  if (A.dim() != p) {
    throw DimensionError("run_chain: A initialization dimension mismatch");
  }
  double a_scalar = (p == 1) ? A(0, 0) : 0.0;

  const int kept = config.kept_draws();
  PosteriorSamples out;
  out.theta_draws.assign(static_cast<std::size_t>(k),
                         Eigen::MatrixXd(p, kept));
  out.A_draws.reserve(static_cast<std::size_t>(kept));
  out.beta_draws.resize(mp, kept);

  long accepted = 0;
  int slot = 0;
  for (int iter = 1; iter <= config.total_iterations; ++iter) {
    try {
      thetas = gibbs_update_theta(data, HyperState{A, beta}, rng);
      beta = gibbs_update_beta(data, thetas, A, rng);

      if (config.a_update == AUpdate::FlatExactGibbs) {
        A = gibbs_update_A_flat_exact(data, std::span(thetas), beta, rng);
        ++accepted;
      } else if (p == 1) {
        const double scatter =
            residual_scatter(std::span(data.groups), std::span(thetas),
                             beta)(0, 0);
        const auto step = mh_step_a_univariate(a_scalar, scatter, k, prior,
                                               config.proposal_sigma, rng);
        if (step.accepted) {
          a_scalar = step.value;
          A = SpdMatrix(Eigen::MatrixXd::Constant(1, 1, a_scalar));
          ++accepted;
        }
      } else {
        const Eigen::MatrixXd scatter =
            residual_scatter(std::span(data.groups), std::span(thetas), beta);
        auto step = mh_step_a_multivariate(A, scatter, k, prior,
                                           config.proposal_nu, rng);
        out.proposal_failures += step.proposal_failures;
        if (step.accepted) {
          A = std::move(step.value);
          ++accepted;
        }
      }

      if (iter > config.burn_in &&
          (iter - config.burn_in) % config.thin == 0) {
        for (Eigen::Index j = 0; j < k; ++j) {
          out.theta_draws[static_cast<std::size_t>(j)].col(slot) =
              thetas[static_cast<std::size_t>(j)];
        }
        out.beta_draws.col(slot) = beta;
        out.A_draws.push_back(A);
        ++slot;
      }
    } catch (const Error& e) {
      throw ChainError("run_chain failed at iteration " +
                       std::to_string(iter) + ": " + e.what());
    }
  }
  out.acceptance_rate =
      static_cast<double>(accepted) / config.total_iterations;

  if (config.compute_diagnostics) {
    const auto add_ess = [&out](const std::string& label, const Chain& chain) {
      try {
        out.ess_per_parameter[label] = effective_sample_size(chain);
      } catch (const DegenerateChainError&) {
        // constant chain: no meaningful ESS, leave the entry out
      }
    };
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index l = 0; l < p; ++l) {
        const std::string label =
            (p == 1) ? "theta[" + std::to_string(j + 1) + "]"
                     : "theta[" + std::to_string(j + 1) + "][" +
                           std::to_string(l + 1) + "]";
        add_ess(label, out.theta_chain(j, l));
      }
    }
    for (Eigen::Index i = 0; i < mp; ++i) {
      add_ess("beta[" + std::to_string(i + 1) + "]", out.beta_chain(i));
    }
    for (Eigen::Index r = 0; r < p; ++r) {
      for (Eigen::Index c = r; c < p; ++c) {
        const std::string label =
            (p == 1) ? "A"
                     : "A[" + std::to_string(r + 1) + "][" +
                           std::to_string(c + 1) + "]";
        add_ess(label, out.a_chain(r, c));
      }
    }
  }
  return out;
}

Interval posterior_interval(std::span<const double> samples, double level) {
  if (samples.empty()) {
    throw DomainError("posterior_interval: empty chain");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("posterior_interval: level must lie in (0, 1)");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double tail = 0.5 * (1.0 - level);
  return Interval{quantile_of_sorted(sorted, tail),
                  quantile_of_sorted(sorted, 1.0 - tail)};
}

}  // namespace uspcov
