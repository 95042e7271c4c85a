#pragma once

#include <functional>

#include <pdml/types.hpp>

namespace oracles {

// log I_nu(x) from the ascending series evaluated in arbitrary precision
// (MPFR, 512-bit mantissa, fixed term count). Independent of the library's
// evaluator: no branch switching, no recurrences.
double mpfr_log_bessel_i(double nu, double x, int terms = 200);

// log C_M(kappa) assembled from the arbitrary-precision series.
double mpfr_log_c(int dim, double kappa);

// Mean resultant length A_M(kappa) = I_{M/2}/I_{M/2-1} via the series.
double mpfr_mean_resultant_length(int dim, double kappa);

// Central finite difference with the given step.
inline double central_fd(const std::function<double(double)>& f, double x,
                         double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// log C_3(kappa) in closed form (no Bessel machinery):
// C_3(k) = k / (4 pi sinh k); stable for large kappa.
double closed_form_log_c3(double kappa);

// Bessel-free log-density of a vMF on S^2: kappa * s(x, mu) + closed-form
// normalizer.
double closed_form_vmf_log_density3(const pdml::Vector& mu, double kappa,
                                    const pdml::Vector& x);

}  // namespace oracles
