#include "uspcov/priors.hpp"

#include "uspcov/model.hpp"

namespace uspcov {

PriorSpec PriorSpec::usp(SpdMatrix v0, std::string label,
                         std::optional<double> delta) {
  PriorSpec spec;
  spec.kind_ = Usp{std::move(v0)};
  spec.label_ = std::move(label);
  spec.delta_ = delta;
  return spec;
}

PriorSpec PriorSpec::improper_flat(std::string label) {
  PriorSpec spec;
  spec.kind_ = Flat{};
  spec.label_ = std::move(label);
  return spec;
}

const SpdMatrix& PriorSpec::v0() const {
  if (!is_usp()) {
    throw DomainError("PriorSpec: the flat prior has no shape matrix");
  }
  return std::get<Usp>(kind_).v0;
}

double PriorSpec::log_density(const SpdMatrix& A) const {
  if (is_flat()) return 0.0;
  return log_usp_density(A, v0());
}

SpdMatrix v0_harmonic_mean(const Dataset& data) {
  data.validate();
  const Eigen::Index p = data.p();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd sum_inv = Eigen::MatrixXd::Zero(p, p);
  for (const auto& g : data.groups) {
    sum_inv += g.V.llt().solve(eye);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sum_inv);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("v0_harmonic_mean: sum of inverses failed");
  }
  Eigen::MatrixXd result =
      static_cast<double>(data.k()) * llt.solve(eye);
  return SpdMatrix(0.5 * (result + result.transpose()));
}

SpdMatrix v0_arithmetic_mean(const Dataset& data) {
  data.validate();
  const Eigen::Index p = data.p();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p);
  for (const auto& g : data.groups) {
    sum += g.V.matrix();
  }
  return SpdMatrix(sum / static_cast<double>(data.k()));
}

SpdMatrix v0_scaled_diag(const SpdMatrix& base, double delta) {
  if (!(delta > 0.0)) {
    throw DomainError("v0_scaled_diag: delta must be positive");
  }
  return SpdMatrix(
      (delta * base.matrix().diagonal()).asDiagonal().toDenseMatrix());
}

}  // namespace uspcov
