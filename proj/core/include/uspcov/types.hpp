#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uspcov/spd_matrix.hpp"

namespace uspcov {

/// One scalar functional of MCMC output (or any ordered sample).
using Chain = std::vector<double>;

struct Interval {
  double low = 0.0;
  double upp = 0.0;
};

/// One group's unbiased estimate vector, known sampling covariance, and
/// covariate vector. The first covariate entry is 1.0 when an intercept is
/// fit. The block-diagonal design matrix (mp x p, with x repeated along the
/// diagonal) is implied by x and p and can be materialized on demand.
struct GroupObservation {
  Eigen::VectorXd y;  // length p
  SpdMatrix V;        // p x p sampling covariance
  Eigen::VectorXd x;  // length m

  Eigen::Index p() const { return y.size(); }
  Eigen::Index m() const { return x.size(); }

  void validate() const;

  /// The block-diagonal design (mp x p, one copy of x per outcome component).
  Eigen::MatrixXd block_design() const;

  /// The regression surface X^T beta without materializing the design:
  /// component l is dot(x, beta[l*m .. (l+1)*m)).
  Eigen::VectorXd regression_mean(const Eigen::VectorXd& beta) const;
};

/// Ordered collection of groups sharing p and m.
struct Dataset {
  std::vector<GroupObservation> groups;
  std::string label;

  Eigen::Index k() const { return static_cast<Eigen::Index>(groups.size()); }
  Eigen::Index p() const { return groups.empty() ? 0 : groups.front().p(); }
  Eigen::Index m() const { return groups.empty() ? 0 : groups.front().m(); }

  /// Checks k >= 2, per-group invariants, and dimension consistency.
  void validate() const;
};

/// The non-group unknowns: second-level covariance A and regression
/// coefficients beta (length m*p).
struct HyperState {
  SpdMatrix A;
  Eigen::VectorXd beta;
};

/// Mean and covariance of a Gaussian distribution.
struct GaussianMoments {
  Eigen::VectorXd mean;
  SpdMatrix cov;

  void validate() const;
};

}  // namespace uspcov
