#include "uspcov/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace uspcov {

namespace {

Eigen::LLT<Eigen::MatrixXd> llt_of_sum(const SpdMatrix& V, const SpdMatrix& A,
                                       const char* what) {
  if (V.dim() != A.dim()) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(V.dim()) + " vs " +
                         std::to_string(A.dim()) + ")");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(V.matrix() + A.matrix());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError(std::string(what) +
                                   ": Cholesky of the matrix sum failed");
  }
  return llt;
}

}  // namespace

Eigen::MatrixXd shrinkage_matrix(const SpdMatrix& V, const SpdMatrix& A) {
  const auto llt = llt_of_sum(V, A, "shrinkage_matrix");
  // B^T = (V+A)^{-1} V, so one triangular solve gives B without an inverse.
  return llt.solve(V.matrix()).transpose();
}

GaussianMoments conditional_theta_moments(const GroupObservation& obs,
                                          const HyperState& state) {
  obs.validate();
  const auto llt = llt_of_sum(obs.V, state.A, "conditional_theta_moments");
  const Eigen::MatrixXd shrink = llt.solve(obs.V.matrix()).transpose();
  const Eigen::MatrixXd complement =
      llt.solve(state.A.matrix()).transpose();  // I - B = A (V+A)^{-1}
  Eigen::VectorXd mean =
      complement * obs.y + shrink * obs.regression_mean(state.beta);
  Eigen::MatrixXd cov = complement * obs.V.matrix();
  return GaussianMoments{std::move(mean),
                         SpdMatrix(0.5 * (cov + cov.transpose()))};
}

GaussianMoments conditional_beta_moments(
    std::span<const GroupObservation> groups,
    std::span<const Eigen::VectorXd> thetas, const SpdMatrix& A) {
  if (groups.empty()) {
    throw DimensionError("conditional_beta_moments: needs at least one group");
  }
  if (thetas.size() != groups.size()) {
    throw DimensionError("conditional_beta_moments: " +
                         std::to_string(thetas.size()) + " thetas for " +
                         std::to_string(groups.size()) + " groups");
  }
  const Eigen::Index p = groups.front().p();
  const Eigen::Index m = groups.front().m();
  const Eigen::Index mp = m * p;
  if (A.dim() != p) {
    throw DimensionError("conditional_beta_moments: A dimension mismatch");
  }

  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(mp, mp);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mp);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (thetas[j].size() != p) {
      throw DimensionError("conditional_beta_moments: theta " +
                           std::to_string(j + 1) + " has wrong length");
    }
    const Eigen::MatrixXd design = groups[j].block_design();  // mp x p
    precision.noalias() += design * A.llt().solve(design.transpose());
    rhs.noalias() += design * A.llt().solve(thetas[j]);
  }

  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw SingularDesignError(
        "conditional_beta_moments: rank-deficient design (the precision of "
        "beta is singular)");
  }
  Eigen::VectorXd mean = llt.solve(rhs);
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(mp, mp));
  return GaussianMoments{std::move(mean),
                         SpdMatrix(0.5 * (cov + cov.transpose()))};
}

GaussianMoments conditional_beta_moments(
    const Dataset& data, const std::vector<Eigen::VectorXd>& thetas,
    const SpdMatrix& A) {
  return conditional_beta_moments(std::span(data.groups), std::span(thetas),
                                  A);
}

double log_usp_density(const SpdMatrix& A, const SpdMatrix& v0) {
  const auto llt = llt_of_sum(v0, A, "log_usp_density");
  const double log_det =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -static_cast<double>(A.dim() + 1) * log_det;
}

Eigen::MatrixXd residual_scatter(std::span<const GroupObservation> groups,
                                 std::span<const Eigen::VectorXd> thetas,
                                 const Eigen::VectorXd& beta) {
  if (thetas.size() != groups.size()) {
    throw DimensionError("residual_scatter: " + std::to_string(thetas.size()) +
                         " thetas for " + std::to_string(groups.size()) +
                         " groups");
  }
  const Eigen::Index p = groups.front().p();
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const Eigen::VectorXd r = thetas[j] - groups[j].regression_mean(beta);
    scatter.noalias() += r * r.transpose();
  }
  return scatter;
}

double log_conditional_A_density(const SpdMatrix& A, const Dataset& data,
                                 std::span<const Eigen::VectorXd> thetas,
                                 const Eigen::VectorXd& beta,
                                 const PriorSpec& prior) {
  const Eigen::Index k = data.k();
  const Eigen::Index p = data.p();
  if (A.dim() != p) {
    throw DimensionError("log_conditional_A_density: A dimension mismatch");
  }
  const Eigen::MatrixXd scatter =
      residual_scatter(std::span(data.groups), thetas, beta);
  const double quad = A.llt().solve(scatter).trace();
  const double log_lik = -0.5 * static_cast<double>(k * p) *
                             std::log(2.0 * std::numbers::pi) -
                         0.5 * static_cast<double>(k) * A.log_det() -
                         0.5 * quad;
  return log_lik + prior.log_density(A);
}

double b0_to_A_univariate(double b0, double v0) {
  if (!(b0 > 0.0 && b0 <= 1.0)) {
    throw DomainError("b0_to_A_univariate: b0 must lie in (0, 1], got " +
                      std::to_string(b0));
  }
  if (!(v0 > 0.0)) {
    throw DomainError("b0_to_A_univariate: v0 must be positive");
  }
  return (1.0 - b0) * v0 / b0;
}

bool propriety_check(Eigen::Index k, Eigen::Index p, Eigen::Index m) {
  if (k < 1 || p < 1 || m < 1) {
    throw DomainError("propriety_check: k, p, m must be positive");
  }
  return k > p + m + 1;
}

}  // namespace uspcov
