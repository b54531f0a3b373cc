#pragma once

#include <optional>
#include <string>
#include <variant>

#include "uspcov/types.hpp"

namespace uspcov {

/// Prior on the second-level covariance A: either a uniform shrinkage prior
/// with shape matrix V0 (density proportional to |V0 + A|^{-(p+1)} on SPD
/// matrices) or the improper flat prior I{|A|>0} dA.
class PriorSpec {
 public:
  static PriorSpec usp(SpdMatrix v0, std::string label,
                       std::optional<double> delta = std::nullopt);
  static PriorSpec improper_flat(std::string label = "flat");

  bool is_flat() const { return std::holds_alternative<Flat>(kind_); }
  bool is_usp() const { return std::holds_alternative<Usp>(kind_); }

  /// Shape matrix of the USP variant; throws for the flat prior.
  const SpdMatrix& v0() const;

  const std::string& label() const { return label_; }

  /// Scale factor used to build V0 (bookkeeping for reports; unset for the
  /// flat prior and for explicit V0 matrices).
  std::optional<double> delta() const { return delta_; }

  /// Log prior density at A, up to an additive constant (0 for the flat
  /// prior).
  double log_density(const SpdMatrix& A) const;

 private:
  struct Usp {
    SpdMatrix v0;
  };
  struct Flat {};

  PriorSpec() = default;

  std::variant<Usp, Flat> kind_;
  std::string label_;
  std::optional<double> delta_;
};

/// k * (sum_j V_j^{-1})^{-1}; the scalar case reduces to k / sum(1/V_j).
SpdMatrix v0_harmonic_mean(const Dataset& data);

/// (sum_j V_j) / k.
SpdMatrix v0_arithmetic_mean(const Dataset& data);

/// delta times the diagonal matrix extracted from base; for p = 1 this is
/// just delta * base.
SpdMatrix v0_scaled_diag(const SpdMatrix& base, double delta);

}  // namespace uspcov
