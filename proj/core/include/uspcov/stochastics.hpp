#pragma once

#include <span>

#include "uspcov/rng.hpp"
#include "uspcov/types.hpp"

namespace uspcov {

/// One draw mean + L z with L the Cholesky factor of cov and z iid standard
/// normals.
Eigen::VectorXd sample_mvn(const GaussianMoments& m, RngStream& rng);

/// Wishart(nu, scale) draw via the Bartlett decomposition. Requires
/// nu > p - 1.
SpdMatrix sample_wishart(double nu, const SpdMatrix& scale, RngStream& rng);

/// Inverse Wishart(nu, scale) draw: Bartlett factor of Wishart(nu, scale^{-1})
/// inverted through triangular solves. Requires nu > p - 1.
SpdMatrix sample_inverse_wishart(double nu, const SpdMatrix& scale,
                                 RngStream& rng);

/// log Gamma_p(a), the multivariate gamma function.
double log_multivariate_gamma(Eigen::Index p, double a);

/// Fully normalized log density of the inverse Wishart(nu, scale)
/// distribution at A.
double log_inverse_wishart_density(const SpdMatrix& A, double nu,
                                   const SpdMatrix& scale);

/// Standard normal CDF via the complementary error function.
double std_normal_cdf(double x);

/// P(X <= h, Y <= k) for a standard bivariate normal with correlation rho,
/// computed by the Drezner-Wesolowsky/Genz Gauss-Legendre scheme (absolute
/// error well below 1e-7). Deterministic, so downstream coverage estimates
/// are exactly reproducible.
double bivariate_normal_cdf(double h, double k, double rho);

/// P(lower < Z < upper) componentwise for Z ~ N(m). Supports p = 1 and
/// p = 2; +/-infinity bounds are allowed. Larger p is not implemented and
/// raises DomainError.
double mvn_rectangle_prob(const GaussianMoments& m,
                          const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper);

/// Linear-interpolation quantile of the sorted sample (h = (n-1) q).
double empirical_quantile(std::span<const double> samples, double q);

/// Effective sample size n / (1 + 2 sum of autocorrelations), with the
/// autocovariance sum truncated by the initial-positive-sequence rule on
/// pairwise sums. Superefficient chains are capped at 1.5 n; a constant
/// chain raises DegenerateChainError.
double effective_sample_size(std::span<const double> chain);

}  // namespace uspcov
