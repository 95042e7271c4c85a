#include "pdml/specfn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pdml/errors.hpp"

namespace pdml {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
constexpr double kLogPi = 1.1447298858494001741;   // log(pi)

void check_order(double order) {
  if (!(order >= 0.0)) {
    throw DomainError("log_bessel_i: order must be >= 0, got " +
                      std::to_string(order));
  }
  const double twice = 2.0 * order;
  if (std::floor(twice) != twice) {
    throw DomainError("log_bessel_i: order must be a half-integer, got " +
                      std::to_string(order));
  }
}

// Ascending series: I_nu(x) = (x/2)^nu / Gamma(nu+1) * sum_k t_k with
// t_0 = 1, t_{k+1} = t_k * (x^2/4) / ((k+1)(nu+k+1)). All terms positive,
// so the sum is evaluated in linear domain and only the prefactor is logged.
double log_bessel_i_series_impl(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 2000; ++k) {
    term *= q / (static_cast<double>(k) * (nu + static_cast<double>(k)));
    sum += term;
    if (term < sum * 1e-18) break;
  }
  return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) + std::log(sum);
}

// I_{nu+1}(x)/I_nu(x) by the continued fraction
//   1 / (2(nu+1)/x + 1 / (2(nu+2)/x + ...))
// evaluated with the modified Lentz algorithm.
double bessel_i_ratio_cf(double nu, double x) {
  const double tiny = 1e-300;
  double f = tiny;
  double c = f;
  double d = 0.0;
  for (int k = 1; k <= 100000; ++k) {
    const double b = 2.0 * (nu + static_cast<double>(k)) / x;
    d = b + d;
    if (d == 0.0) d = tiny;
    c = b + 1.0 / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return f;
}

// log I_0(x) from the large-argument expansion
//   I_0(x) ~ e^x / sqrt(2 pi x) * (1 + 1/(8x) + 9/(128 x^2) + ...);
// for nu = 0 every term of the expansion is positive. Requires x >= ~35.
double log_bessel_i0_asymptotic(double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 0; k < 40; ++k) {
    const double num = -(4.0 * 0.0 - (2.0 * k + 1.0) * (2.0 * k + 1.0));
    const double next = term * num / (8.0 * (k + 1.0) * x);
    if (std::abs(next) >= std::abs(term)) break;  // divergence onset
    term = next;
    sum += term;
    if (std::abs(term) < 1e-18 * sum) break;
  }
  return x - 0.5 * std::log(2.0 * M_PI * x) + std::log(sum);
}

// log I_{1/2}(x) = log( sqrt(2/(pi x)) sinh x ), written to stay finite for
// large x: sinh x = e^x (1 - e^{-2x}) / 2.
double log_bessel_i_half(double x) {
  return 0.5 * std::log(2.0 / (M_PI * x)) + x + std::log1p(-std::exp(-2.0 * x)) -
         std::log(2.0);
}

// Ratio branch: one continued fraction at the top order, then the stable
// downward recurrence on ratios rho_{j-1} = 1/(2j/x + rho_j), accumulating
// log I_nu = log I_base + sum_j log rho_j with base in {0, 1/2}.
double log_bessel_i_ratio_branch_impl(double nu, double x) {
  const double base = nu - std::floor(nu);  // 0.0 or 0.5
  double log_base;
  if (base == 0.0) {
    log_base = log_bessel_i0_asymptotic(x);
  } else {
    log_base = log_bessel_i_half(x);
  }
  if (nu == base) return log_base;

  double rho = bessel_i_ratio_cf(nu, x);  // I_{nu+1}/I_nu
  double sum_logs = 0.0;
  for (double j = nu; j > base + 0.5; j -= 1.0) {
    rho = 1.0 / (2.0 * j / x + rho);  // now I_j / I_{j-1}
    sum_logs += std::log(rho);
  }
  return log_base + sum_logs;
}

}  // namespace

double log_bessel_i_switchover(double order) {
  // The series is cheap and accurate while x is below the order; the ratio
  // branch needs x large enough for the asymptotic base evaluation.
  return std::max(40.0, order);
}

double log_bessel_i_series_branch(double order, double x) {
  check_order(order);
  if (!(x > 0.0)) throw DomainError("log_bessel_i_series_branch: x must be > 0");
  return log_bessel_i_series_impl(order, x);
}

double log_bessel_i_ratio_branch(double order, double x) {
  check_order(order);
  if (!(x > 0.0)) throw DomainError("log_bessel_i_ratio_branch: x must be > 0");
  return log_bessel_i_ratio_branch_impl(order, x);
}

double log_bessel_i(double order, double x) {
  check_order(order);
  if (!(x >= 0.0)) {
    throw DomainError("log_bessel_i: x must be >= 0, got " + std::to_string(x));
  }
  if (x == 0.0) {
    return order == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  if (x < log_bessel_i_switchover(order)) {
    return log_bessel_i_series_impl(order, x);
  }
  return log_bessel_i_ratio_branch_impl(order, x);
}

double bessel_i_ratio(double order, double x) {
  check_order(order);
  if (!(x >= 0.0)) {
    throw DomainError("bessel_i_ratio: x must be >= 0, got " +
                      std::to_string(x));
  }
  if (x == 0.0) return 0.0;
  return bessel_i_ratio_cf(order, x);
}

double log_c_exact(int dim, double kappa) {
  if (dim < 2) {
    throw DomainError("log_c_exact: dim must be >= 2, got " +
                      std::to_string(dim));
  }
  if (!(kappa >= 0.0)) {
    throw DomainError("log_c_exact: kappa must be >= 0, got " +
                      std::to_string(kappa));
  }
  const double half_m = 0.5 * static_cast<double>(dim);
  if (kappa == 0.0) {
    // Uniform density on S^{M-1}: Gamma(M/2) / (2 pi^{M/2}).
    return std::lgamma(half_m) - std::log(2.0) - half_m * kLogPi;
  }
  const double nu = half_m - 1.0;
  return nu * std::log(kappa) - half_m * kLog2Pi - log_bessel_i(nu, kappa);
}

double mean_resultant_length(int dim, double kappa) {
  if (dim < 2) {
    throw DomainError("mean_resultant_length: dim must be >= 2");
  }
  if (!(kappa >= 0.0)) {
    throw DomainError("mean_resultant_length: kappa must be >= 0");
  }
  if (kappa == 0.0) return 0.0;
  return bessel_i_ratio(0.5 * dim - 1.0, kappa);
}

QuadraticNormalizerFit fit_log_c_quadratic(int dim,
                                           const std::vector<double>& kappa_grid) {
  std::vector<double> grid = kappa_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.size() < 3) {
    throw FitError("fit_log_c_quadratic: need >= 3 distinct kappa points, got " +
                   std::to_string(grid.size()));
  }
  const int n = static_cast<int>(grid.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd target(n);
  for (int i = 0; i < n; ++i) {
    const double k = grid[i];
    design(i, 0) = 1.0;
    design(i, 1) = k;
    design(i, 2) = k * k;
    target(i) = log_c_exact(dim, k);
  }
  const Eigen::Vector3d coef =
      design.colPivHouseholderQr().solve(target);

  QuadraticNormalizerFit fit;
  fit.dim = dim;
  fit.a = coef(0);
  fit.b = coef(1);
  fit.c = coef(2);
  fit.kappa_min = grid.front();
  fit.kappa_max = grid.back();

  // Quality gate on the canonical 41-point grid over the fit range.
  double sq_err = 0.0;
  double sq_val = 0.0;
  const int m = 41;
  for (int i = 0; i < m; ++i) {
    const double k =
        fit.kappa_min + (fit.kappa_max - fit.kappa_min) * i / (m - 1.0);
    const double exact = log_c_exact(dim, k);
    const double err = fit(k) - exact;
    sq_err += err * err;
    sq_val += exact * exact;
  }
  fit.rel_mse = sq_err / sq_val;

  if (!(fit.c < 0.0)) {
    throw FitError("fit_log_c_quadratic: curvature must be negative (dim " +
                   std::to_string(dim) + ", c = " + std::to_string(fit.c) + ")");
  }
  // c < 0 makes the derivative decreasing, so checking at kappa_min suffices.
  if (!(fit.derivative(fit.kappa_min) < 0.0)) {
    throw FitError(
        "fit_log_c_quadratic: model must be strictly decreasing on its range");
  }
  if (!(fit.rel_mse < 1e-3)) {
    throw FitError("fit_log_c_quadratic: relative MSE " +
                   std::to_string(fit.rel_mse) + " exceeds 0.1% gate");
  }
  return fit;
}

QuadraticNormalizerFit published_normalizer_fit(int dim) {
  QuadraticNormalizerFit fit;
  fit.kappa_min = 10.0;
  fit.kappa_max = 50.0;
  if (dim == 128) {
    fit.dim = 128;
    fit.a = 127.0;
    fit.b = -0.01909;
    fit.c = -0.003355;
  } else if (dim == 512) {
    fit.dim = 512;
    fit.a = 868.0;
    fit.b = -0.0002662;
    fit.c = -0.0009685;
  } else {
    throw DomainError("published_normalizer_fit: only dims 128 and 512");
  }
  double sq_err = 0.0;
  double sq_val = 0.0;
  for (int i = 0; i < 41; ++i) {
    const double k = 10.0 + i;
    const double exact = log_c_exact(dim, k);
    const double err = fit(k) - exact;
    sq_err += err * err;
    sq_val += exact * exact;
  }
  fit.rel_mse = sq_err / sq_val;
  return fit;
}

ApproxLogC log_c_approx(const QuadraticNormalizerFit& fit, double kappa) {
  return ApproxLogC{fit(kappa), !fit.contains(kappa)};
}

}  // namespace pdml
