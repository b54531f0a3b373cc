#include "uspcov/spd_matrix.hpp"

#include <cmath>
#include <string>

namespace uspcov {

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw DimensionError("SpdMatrix: expected a nonempty square matrix, got " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTol)) {
    throw NotPositiveDefiniteError(
        "SpdMatrix: asymmetry " + std::to_string(asym) +
        " exceeds tolerance " + std::to_string(kSymmetryTol));
  }
  mat_ = 0.5 * (m + m.transpose());
  llt_.compute(mat_);
  if (llt_.info() != Eigen::Success) {
    throw NotPositiveDefiniteError(
        "SpdMatrix: Cholesky factorization failed (matrix is not positive "
        "definite)");
  }
}

SpdMatrix SpdMatrix::identity(Eigen::Index p) {
  return SpdMatrix(Eigen::MatrixXd::Identity(p, p));
}

double SpdMatrix::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

}  // namespace uspcov
