#pragma once

// Test-only oracles, kept independent of the library's computation paths:
// brute-force quadrature, special-function CDFs, Kolmogorov-Smirnov
// statistics, and dense linear-algebra reference solutions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// --------------------------------------------------------------------------
// Adaptive Simpson quadrature.
// --------------------------------------------------------------------------

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a,
                      double fa, double b, double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive(const std::function<double(double)>& f, double a,
                       double fa, double b, double fb, double m, double fm,
                       double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, fa, m, fm, lm, flm);
  const double right = simpson(f, m, fm, b, fb, rm, frm);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-11) {
  // Pre-split into fixed panels so narrow spikes cannot hide between the
  // three samples of a single top-level Simpson estimate.
  constexpr int kPanels = 64;
  const double width = (b - a) / kPanels;
  double total = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * width;
    const double hi = (i + 1 == kPanels) ? b : lo + width;
    const double m = 0.5 * (lo + hi);
    const double fa = f(lo), fb = f(hi), fm = f(m);
    total += detail::adaptive(f, lo, fa, hi, fb, m, fm,
                              detail::simpson(f, lo, fa, hi, fb, m, fm),
                              tol / kPanels, 42);
  }
  return total;
}

// --------------------------------------------------------------------------
// Regularized incomplete gamma and derived CDFs.
// --------------------------------------------------------------------------

inline double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 1000; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  double b = x + 1.0 - a, c = 1e308, d = 1.0 / b, h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Gamma(shape, rate) CDF.
inline double gamma_cdf(double shape, double rate, double x) {
  return x <= 0.0 ? 0.0 : gamma_p(shape, rate * x);
}

inline double chi2_cdf(double dof, double x) {
  return gamma_cdf(0.5 * dof, 0.5, x);
}

// Inverse-gamma(shape, scale) CDF: P(X <= x) = Q(shape, scale / x).
inline double inv_gamma_cdf(double shape, double scale, double x) {
  return x <= 0.0 ? 0.0 : gamma_q(shape, scale / x);
}

// --------------------------------------------------------------------------
// Kolmogorov-Smirnov statistics.
// --------------------------------------------------------------------------

inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
  }
  return d;
}

inline double ks_statistic_two_sample(std::vector<double> a,
                                      std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia] <= b[ib]) {
      ++ia;
    } else {
      ++ib;
    }
    d = std::max(d, std::abs(static_cast<double>(ia) / na -
                             static_cast<double>(ib) / nb));
  }
  return d;
}

// --------------------------------------------------------------------------
// Simple sample statistics and a kernel-density mode estimate.
// --------------------------------------------------------------------------

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double kde_mode(std::span<const double> samples, int grid_points = 512) {
  const double m = mean(samples);
  const double sd = std::sqrt(variance(samples));
  const double bandwidth =
      1.06 * sd * std::pow(static_cast<double>(samples.size()), -0.2);
  const double lo = m - 4.0 * sd, hi = m + 4.0 * sd;
  double best_x = m, best_density = -1.0;
  for (int g = 0; g < grid_points; ++g) {
    const double x =
        lo + (hi - lo) * static_cast<double>(g) / (grid_points - 1);
    double density = 0.0;
    for (double s : samples) {
      const double z = (x - s) / bandwidth;
      density += std::exp(-0.5 * z * z);
    }
    if (density > best_density) {
      best_density = density;
      best_x = x;
    }
  }
  return best_x;
}

// --------------------------------------------------------------------------
// Dense generalized-least-squares reference for the beta conditional
// (explicit inverses are fine here; this is the independent route).
// --------------------------------------------------------------------------

struct GlsResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline GlsResult gls_beta(const std::vector<Eigen::MatrixXd>& designs,
                          const std::vector<Eigen::VectorXd>& thetas,
                          const Eigen::MatrixXd& a) {
  const Eigen::Index mp = designs.front().rows();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mp, mp);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mp);
  const Eigen::MatrixXd a_inv = a.inverse();
  for (std::size_t j = 0; j < designs.size(); ++j) {
    h += designs[j] * a_inv * designs[j].transpose();
    rhs += designs[j] * a_inv * thetas[j];
  }
  const Eigen::MatrixXd cov = h.inverse();
  return GlsResult{cov * rhs, cov};
}

// Dense multivariate normal log density (explicit inverse and determinant).
inline double dense_mvn_log_density(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& cov) {
  const Eigen::Index p = x.size();
  const Eigen::VectorXd r = x - mu;
  return -0.5 * static_cast<double>(p) * std::log(2.0 * std::numbers::pi) -
         0.5 * std::log(cov.determinant()) -
         0.5 * r.dot(cov.inverse() * r);
}

}  // namespace oracle
