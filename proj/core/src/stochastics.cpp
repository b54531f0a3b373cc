#include "uspcov/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace uspcov {

Eigen::VectorXd sample_mvn(const GaussianMoments& m, RngStream& rng) {
  m.validate();
  const Eigen::Index p = m.mean.size();
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) z(i) = rng.normal();
  return m.mean + m.cov.llt().matrixL() * z;
}

namespace {

// Lower-triangular Bartlett factor T with T T^T ~ Wishart(nu, I).
// Fill order (row by row: subdiagonal normals, then the chi diagonal) is part
// of the determinism contract.
Eigen::MatrixXd bartlett_factor(double nu, Eigen::Index p, RngStream& rng) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) t(i, j) = rng.normal();
    t(i, i) = std::sqrt(rng.chi_square(nu - static_cast<double>(i)));
  }
  return t;
}

void require_dof(double nu, Eigen::Index p, const char* what) {
  if (!(nu > static_cast<double>(p - 1))) {
    throw DomainError(std::string(what) + ": degrees of freedom " +
                      std::to_string(nu) + " must exceed p - 1 = " +
                      std::to_string(p - 1));
  }
}

}  // namespace

SpdMatrix sample_wishart(double nu, const SpdMatrix& scale, RngStream& rng) {
  const Eigen::Index p = scale.dim();
  require_dof(nu, p, "sample_wishart");
  const Eigen::MatrixXd lt =
      scale.llt().matrixL() * bartlett_factor(nu, p, rng);
  return SpdMatrix(lt * lt.transpose());
}

SpdMatrix sample_inverse_wishart(double nu, const SpdMatrix& scale,
                                 RngStream& rng) {
  const Eigen::Index p = scale.dim();
  require_dof(nu, p, "sample_inverse_wishart");
  const Eigen::MatrixXd bartlett = bartlett_factor(nu, p, rng);
  // X = L_psi U^{-T} U^{-1} L_psi^T with U the Bartlett factor of a
  // Wishart(nu, I) draw, so X ~ IW(nu, psi) without forming any inverse.
  const Eigen::MatrixXd k = bartlett.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd(scale.llt().matrixL().transpose()));
  return SpdMatrix(k.transpose() * k);
}

double log_multivariate_gamma(Eigen::Index p, double a) {
  if (p < 1) throw DomainError("log_multivariate_gamma: p must be >= 1");
  double sum = 0.25 * static_cast<double>(p * (p - 1)) *
               std::log(std::numbers::pi);
  for (Eigen::Index j = 1; j <= p; ++j) {
    sum += std::lgamma(a + 0.5 * static_cast<double>(1 - j));
  }
  return sum;
}

double log_inverse_wishart_density(const SpdMatrix& A, double nu,
                                   const SpdMatrix& scale) {
  const Eigen::Index p = A.dim();
  if (scale.dim() != p) {
    throw DimensionError("log_inverse_wishart_density: dimension mismatch");
  }
  require_dof(nu, p, "log_inverse_wishart_density");
  const double trace_term = A.llt().solve(scale.matrix()).trace();
  return 0.5 * nu * scale.log_det() -
         0.5 * nu * static_cast<double>(p) * std::log(2.0) -
         log_multivariate_gamma(p, 0.5 * nu) -
         0.5 * (nu + static_cast<double>(p) + 1.0) * A.log_det() -
         0.5 * trace_term;
}

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace {

// Gauss-Legendre abscissae/weights (6-, 12- and 20-point rules, symmetric
// halves) for the Drezner-Wesolowsky/Genz bivariate normal algorithm.
constexpr double kGlX6[] = {0.9324695142031522, 0.6612093864662647,
                            0.2386191860831970};
constexpr double kGlW6[] = {0.1713244923791705, 0.3607615730481384,
                            0.4679139345726904};
constexpr double kGlX12[] = {0.9815606342467191, 0.9041172563704750,
                             0.7699026741943050, 0.5873179542866171,
                             0.3678314989981802, 0.1252334085114692};
constexpr double kGlW12[] = {0.04717533638651177, 0.1069393259953183,
                             0.1600783285433464,  0.2031674267230659,
                             0.2334925365383547,  0.2491470458134029};
constexpr double kGlX20[] = {0.9931285991850949,  0.9639719272779138,
                             0.9122344282513259,  0.8391169718222188,
                             0.7463319064601508,  0.6360536807265150,
                             0.5108670019508271,  0.3737060887154196,
                             0.2277858511416451,  0.07652652113349733};
constexpr double kGlW20[] = {0.01761400713915212, 0.04060142980038694,
                             0.06267204833410906, 0.08327674157670475,
                             0.1019301198172404,  0.1181945319615184,
                             0.1316886384491766,  0.1420961093183821,
                             0.1491729864726037,  0.1527533871307259};

// Upper-quadrant probability P(X > h, Y > k) for a standard bivariate
// normal with correlation r.
double bvn_upper(double h, double k, double r) {
  const double twopi = 2.0 * std::numbers::pi;
  const double* gx;
  const double* gw;
  int ng;
  const double ar = std::abs(r);
  if (ar < 0.3) {
    gx = kGlX6;
    gw = kGlW6;
    ng = 3;
  } else if (ar < 0.75) {
    gx = kGlX12;
    gw = kGlW12;
    ng = 6;
  } else {
    gx = kGlX20;
    gw = kGlW20;
    ng = 10;
  }

  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    if (ar > 0.0) {
      const double hs = 0.5 * (h * h + k * k);
      const double asr = std::asin(r);
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double sn = std::sin(asr * (is * gx[i] + 1.0) / 2.0);
          bvn += gw[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
      }
      bvn = bvn * asr / (2.0 * twopi);
    }
    bvn += std_normal_cdf(-h) * std_normal_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      double asr = -0.5 * (bs / as + hk);
      if (asr > -100.0) {
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
               c * d * as * as / 5.0);
      }
      if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        bvn -= std::exp(-0.5 * hk) * std::sqrt(twopi) *
               std_normal_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a *= 0.5;
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          double xs = a * (is * gx[i] + 1.0);
          xs *= xs;
          const double rs = std::sqrt(1.0 - xs);
          asr = -0.5 * (bs / xs + hk);
          if (asr > -100.0) {
            bvn += a * gw[i] * std::exp(asr) *
                   (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs * (1.0 + d * xs)));
          }
        }
      }
      bvn = -bvn / twopi;
    }
    if (r > 0.0) {
      bvn += std_normal_cdf(-std::max(h, k));
    } else {
      bvn = -bvn;
      if (k > h) bvn += std_normal_cdf(k) - std_normal_cdf(h);
    }
  }
  return bvn;
}

}  // namespace

double bivariate_normal_cdf(double h, double k, double rho) {
  if (std::isnan(h) || std::isnan(k) || !(rho >= -1.0 && rho <= 1.0)) {
    throw DomainError("bivariate_normal_cdf: invalid arguments");
  }
  if (std::isinf(h) && h < 0.0) return 0.0;
  if (std::isinf(k) && k < 0.0) return 0.0;
  if (std::isinf(h)) return std::isinf(k) ? 1.0 : std_normal_cdf(k);
  if (std::isinf(k)) return std_normal_cdf(h);
  return bvn_upper(-h, -k, rho);
}

double mvn_rectangle_prob(const GaussianMoments& m,
                          const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper) {
  m.validate();
  const Eigen::Index p = m.mean.size();
  if (lower.size() != p || upper.size() != p) {
    throw DimensionError("mvn_rectangle_prob: bound length mismatch");
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!(lower(i) < upper(i))) {
      throw DomainError("mvn_rectangle_prob: rectangle is empty in component " +
                        std::to_string(i + 1));
    }
  }

  if (p == 1) {
    const double sd = std::sqrt(m.cov(0, 0));
    return std_normal_cdf((upper(0) - m.mean(0)) / sd) -
           std_normal_cdf((lower(0) - m.mean(0)) / sd);
  }
  if (p == 2) {
    const double s1 = std::sqrt(m.cov(0, 0));
    const double s2 = std::sqrt(m.cov(1, 1));
    const double rho = m.cov(0, 1) / (s1 * s2);
    const auto z = [&](double b, Eigen::Index i) {
      if (std::isinf(b)) return b;
      return (b - m.mean(i)) / (i == 0 ? s1 : s2);
    };
    const double u1 = z(upper(0), 0), u2 = z(upper(1), 1);
    const double l1 = z(lower(0), 0), l2 = z(lower(1), 1);
    const double prob = bivariate_normal_cdf(u1, u2, rho) -
                        bivariate_normal_cdf(l1, u2, rho) -
                        bivariate_normal_cdf(u1, l2, rho) +
                        bivariate_normal_cdf(l1, l2, rho);
    return std::clamp(prob, 0.0, 1.0);
  }
  throw DomainError(
      "mvn_rectangle_prob: only p = 1 and p = 2 are supported (got p = " +
      std::to_string(p) + ")");
}

double empirical_quantile(std::span<const double> samples, double q) {
  if (samples.empty()) {
    throw DomainError("empirical_quantile: empty sample");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw DomainError("empirical_quantile: q must lie in [0, 1]");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double w = h - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

double effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 10) {
    throw DomainError("effective_sample_size: chain length must be >= 10");
  }
  const double nd = static_cast<double>(n);
  const auto [min_it, max_it] = std::minmax_element(chain.begin(), chain.end());
  if (*min_it == *max_it) {
    throw DegenerateChainError("effective_sample_size: constant chain");
  }
  double mean = 0.0;
  for (double v : chain) mean += v;
  mean /= nd;

  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = chain[i] - mean;

  const auto autocov = [&](std::size_t lag) {
    double sum = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) {
      sum += centered[i] * centered[i + lag];
    }
    return sum / nd;
  };

  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) {
    throw DegenerateChainError(
        "effective_sample_size: chain has zero variance");
  }

  // Initial positive sequence on pairwise autocovariance sums.
  double pair_sum = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair_sum += pair;
  }

  const double denom = (2.0 * pair_sum - gamma0) / gamma0;
  const double cap = 1.5 * nd;
  if (!(denom > 0.0)) return cap;
  return std::min(cap, nd / denom);
}

}  // namespace uspcov
