#pragma once

#include <Eigen/Dense>

#include "uspcov/errors.hpp"

namespace uspcov {

/// Symmetric positive definite matrix, validated on construction.
///
/// Symmetry is enforced by averaging with the transpose; asymmetry beyond
/// kSymmetryTol is an error. Positive definiteness is defined operationally
/// as a successful Cholesky factorization, which is cached so that callers
/// can reuse it for solves, sampling and log-determinants instead of forming
/// explicit inverses.
class SpdMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-10;

  SpdMatrix() = default;
  explicit SpdMatrix(Eigen::MatrixXd m);

  static SpdMatrix identity(Eigen::Index p);

  Eigen::Index dim() const { return mat_.rows(); }
  const Eigen::MatrixXd& matrix() const { return mat_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }
  double log_det() const;
  double operator()(Eigen::Index r, Eigen::Index c) const { return mat_(r, c); }

 private:
  Eigen::MatrixXd mat_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace uspcov
