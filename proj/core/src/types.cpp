#include "uspcov/types.hpp"

#include <string>

#include "uspcov/errors.hpp"

namespace uspcov {

void GroupObservation::validate() const {
  if (p() < 1) throw DimensionError("GroupObservation: p must be >= 1");
  if (m() < 1) throw DimensionError("GroupObservation: m must be >= 1");
  if (V.dim() != p()) {
    throw DimensionError("GroupObservation: V is " + std::to_string(V.dim()) +
                         "-dimensional but y has length " +
                         std::to_string(p()));
  }
}

Eigen::MatrixXd GroupObservation::block_design() const {
  const Eigen::Index pp = p(), mm = m();
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(mm * pp, pp);
  for (Eigen::Index l = 0; l < pp; ++l) {
    design.block(l * mm, l, mm, 1) = x;
  }
  return design;
}

Eigen::VectorXd GroupObservation::regression_mean(
    const Eigen::VectorXd& beta) const {
  const Eigen::Index pp = p(), mm = m();
  if (beta.size() != mm * pp) {
    throw DimensionError("regression_mean: beta has length " +
                         std::to_string(beta.size()) + ", expected " +
                         std::to_string(mm * pp));
  }
  Eigen::VectorXd out(pp);
  for (Eigen::Index l = 0; l < pp; ++l) {
    out(l) = x.dot(beta.segment(l * mm, mm));
  }
  return out;
}

void Dataset::validate() const {
  if (k() < 2) {
    throw DimensionError("Dataset '" + label + "': needs at least 2 groups");
  }
  const Eigen::Index pp = groups.front().p();
  const Eigen::Index mm = groups.front().m();
  for (std::size_t j = 0; j < groups.size(); ++j) {
    try {
      groups[j].validate();
    } catch (const Error& e) {
      throw DimensionError("Dataset '" + label + "' group " +
                           std::to_string(j + 1) + ": " + e.what());
    }
    if (groups[j].p() != pp || groups[j].m() != mm) {
      throw DimensionError("Dataset '" + label + "' group " +
                           std::to_string(j + 1) +
                           ": inconsistent dimensions (expected p=" +
                           std::to_string(pp) + ", m=" + std::to_string(mm) +
                           ")");
    }
  }
}

void GaussianMoments::validate() const {
  if (mean.size() != cov.dim()) {
    throw DimensionError("GaussianMoments: mean length " +
                         std::to_string(mean.size()) +
                         " does not match covariance dimension " +
                         std::to_string(cov.dim()));
  }
}

}  // namespace uspcov
