#pragma once

#include <span>
#include <vector>

#include "uspcov/priors.hpp"
#include "uspcov/types.hpp"

namespace uspcov {

/// Shrinkage matrix B = V (V + A)^{-1}, computed by a linear solve against
/// the Cholesky factor of V + A. Its eigenvalues lie strictly in (0, 1):
/// B -> I as A -> 0 (full pooling) and B -> 0 as A grows (no pooling).
Eigen::MatrixXd shrinkage_matrix(const SpdMatrix& V, const SpdMatrix& A);

/// Conditional posterior of one group's random effect given (A, beta):
///   mean = (I - B) y + B X^T beta,   cov = (I - B) V.
/// The mean and covariance are assembled in product form,
/// (I - B) = A (V+A)^{-1}, so the covariance stays positive near A = 0
/// instead of cancelling to zero.
GaussianMoments conditional_theta_moments(const GroupObservation& obs,
                                          const HyperState& state);

/// Conditional posterior of beta given (thetas, A) under a flat prior on
/// beta:
///   Sigma_beta = (sum_j X_j A^{-1} X_j^T)^{-1},
///   mu_beta    = Sigma_beta (sum_j X_j A^{-1} theta_j).
/// A rank-deficient design is reported as SingularDesignError.
GaussianMoments conditional_beta_moments(
    std::span<const GroupObservation> groups,
    std::span<const Eigen::VectorXd> thetas, const SpdMatrix& A);
GaussianMoments conditional_beta_moments(
    const Dataset& data, const std::vector<Eigen::VectorXd>& thetas,
    const SpdMatrix& A);

/// Log density of the uniform shrinkage prior at A, up to an additive
/// constant: -(p+1) log det(V0 + A).
double log_usp_density(const SpdMatrix& A, const SpdMatrix& v0);

/// Residual scatter S = sum_j (theta_j - X_j^T beta)(theta_j - X_j^T beta)^T.
Eigen::MatrixXd residual_scatter(std::span<const GroupObservation> groups,
                                 std::span<const Eigen::VectorXd> thetas,
                                 const Eigen::VectorXd& beta);

/// Log conditional posterior density of A given (thetas, beta), up to an
/// additive constant shared across A values: the sum of the k Gaussian log
/// densities N_p(theta_j | X_j^T beta, A) plus the prior log density.
double log_conditional_A_density(const SpdMatrix& A, const Dataset& data,
                                 std::span<const Eigen::VectorXd> thetas,
                                 const Eigen::VectorXd& beta,
                                 const PriorSpec& prior);

/// Inverse of b0 = v0 / (v0 + A) on (0, 1]: A = (1 - b0) v0 / b0.
double b0_to_A_univariate(double b0, double v0);

/// True iff the joint posterior under the USP (or flat prior on A) and flat
/// prior on beta is proper: k > p + m + 1.
bool propriety_check(Eigen::Index k, Eigen::Index p, Eigen::Index m);

}  // namespace uspcov
