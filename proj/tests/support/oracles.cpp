#include "support/oracles.hpp"

#include <mpfr.h>

#include <cmath>
#include <stdexcept>

namespace oracles {

namespace {
constexpr mpfr_prec_t kPrec = 512;
}

double mpfr_log_bessel_i(double nu, double x, int terms) {
  if (x <= 0.0) throw std::invalid_argument("mpfr_log_bessel_i: x must be > 0");
  mpfr_t half_x, log_half_x, term_log, sum, t, g;
  mpfr_inits2(kPrec, half_x, log_half_x, term_log, sum, t, g, (mpfr_ptr)0);

  mpfr_set_d(half_x, 0.5 * x, MPFR_RNDN);
  mpfr_log(log_half_x, half_x, MPFR_RNDN);

  // sum_k exp((nu + 2k) log(x/2) - lgamma(k+1) - lgamma(nu+k+1))
  mpfr_set_zero(sum, 1);
  for (int k = 0; k < terms; ++k) {
    // term_log = (nu + 2k) * log(x/2)
    mpfr_mul_d(term_log, log_half_x, nu + 2.0 * k, MPFR_RNDN);
    // - lgamma(k+1)
    mpfr_set_d(t, k + 1.0, MPFR_RNDN);
    int sign = 0;
    mpfr_lgamma(g, &sign, t, MPFR_RNDN);
    mpfr_sub(term_log, term_log, g, MPFR_RNDN);
    // - lgamma(nu+k+1)
    mpfr_set_d(t, nu + k + 1.0, MPFR_RNDN);
    mpfr_lgamma(g, &sign, t, MPFR_RNDN);
    mpfr_sub(term_log, term_log, g, MPFR_RNDN);
    mpfr_exp(t, term_log, MPFR_RNDN);
    mpfr_add(sum, sum, t, MPFR_RNDN);
  }
  mpfr_log(sum, sum, MPFR_RNDN);
  const double out = mpfr_get_d(sum, MPFR_RNDN);
  mpfr_clears(half_x, log_half_x, term_log, sum, t, g, (mpfr_ptr)0);
  return out;
}

double mpfr_log_c(int dim, double kappa) {
  if (kappa == 0.0) {
    return std::lgamma(0.5 * dim) - std::log(2.0) -
           0.5 * dim * std::log(M_PI);
  }
  const double nu = 0.5 * dim - 1.0;
  return nu * std::log(kappa) - 0.5 * dim * std::log(2.0 * M_PI) -
         mpfr_log_bessel_i(nu, kappa, 400);
}

double mpfr_mean_resultant_length(int dim, double kappa) {
  const double nu = 0.5 * dim - 1.0;
  return std::exp(mpfr_log_bessel_i(nu + 1.0, kappa, 400) -
                  mpfr_log_bessel_i(nu, kappa, 400));
}

double closed_form_log_c3(double kappa) {
  // log(k) - log(4 pi) - log(sinh k), sinh k = e^k (1 - e^{-2k}) / 2
  return std::log(kappa) - std::log(4.0 * M_PI) -
         (kappa + std::log1p(-std::exp(-2.0 * kappa)) - std::log(2.0));
}

double closed_form_vmf_log_density3(const pdml::Vector& mu, double kappa,
                                    const pdml::Vector& x) {
  if (kappa == 0.0) return -std::log(4.0 * M_PI);
  return closed_form_log_c3(kappa) + kappa * mu.dot(x) / (mu.norm() * x.norm());
}

}  // namespace oracles
