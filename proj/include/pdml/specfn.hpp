#pragma once

#include <vector>

namespace pdml {

// log I_nu(x) for the modified Bessel function of the first kind.
//
// Supported domain: nu a nonnegative half-integer or integer (nu = M/2 - 1
// for embedding dimension M >= 2), x >= 0. Two branches are used: the
// ascending power series for x below a per-order switchover, and a
// continued-fraction ratio combined with a log-scaled order recurrence above
// it. Both branches agree to better than 1e-10 relative at the seam.
double log_bessel_i(double order, double x);

// I_{order+1}(x) / I_order(x) via the Gauss continued fraction. Equals the
// mean resultant length A_M(x) when order = M/2 - 1.
double bessel_i_ratio(double order, double x);

// x where log_bessel_i switches from the series to the ratio branch.
double log_bessel_i_switchover(double order);

// The two branches individually (both valid in a band around the
// switchover); exposed so the seam agreement can be measured directly.
double log_bessel_i_series_branch(double order, double x);
double log_bessel_i_ratio_branch(double order, double x);

// Log normalizing constant of the vMF density in dimension M:
//   log C_M(kappa) = (M/2 - 1) log kappa - (M/2) log(2 pi) - log I_{M/2-1}(kappa)
// kappa = 0 uses the uniform-sphere limit log Gamma(M/2) - log 2 - (M/2) log pi.
double log_c_exact(int dim, double kappa);

// A_M(kappa) = I_{M/2}(kappa) / I_{M/2-1}(kappa) = -d/dkappa log C_M(kappa).
double mean_resultant_length(int dim, double kappa);

// Least-squares quadratic model log C_M(kappa) ~= a + b kappa + c kappa^2,
// valid (by construction) on [kappa_min, kappa_max]; evaluation outside the
// range is permitted extrapolation and is flagged by log_c_approx.
struct QuadraticNormalizerFit {
  int dim = 0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double kappa_min = 0.0;
  double kappa_max = 0.0;
  // Residual MSE relative to the mean squared exact value on a 41-point
  // uniform grid over [kappa_min, kappa_max].
  double rel_mse = 0.0;

  double operator()(double kappa) const { return a + (b + c * kappa) * kappa; }
  double derivative(double kappa) const { return b + 2.0 * c * kappa; }
  bool contains(double kappa) const {
    return kappa >= kappa_min && kappa <= kappa_max;
  }
};

struct ApproxLogC {
  double value = 0.0;
  bool extrapolated = false;
};

// Ordinary least squares of log_c_exact(dim, .) samples on the given grid.
// Throws FitError if the grid has fewer than three distinct points, if the
// curvature is not negative, if the model is not strictly decreasing on the
// grid range, or if the relative MSE gate (< 0.1%) fails.
QuadraticNormalizerFit fit_log_c_quadratic(int dim,
                                           const std::vector<double>& kappa_grid);

// Reference coefficients in common use for dim 128 and 512 (fit range
// kappa in [10, 50]). Throws DomainError for other dims.
QuadraticNormalizerFit published_normalizer_fit(int dim);

ApproxLogC log_c_approx(const QuadraticNormalizerFit& fit, double kappa);

}  // namespace pdml
