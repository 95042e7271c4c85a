#pragma once

#include <cstdint>
#include <vector>

#include "pdml/normalizer.hpp"
#include "pdml/rng.hpp"
#include "pdml/types.hpp"

namespace pdml {

// log density of vMF(p.mu, p.kappa) at x: log C_M(kappa) + kappa s(x, mu).
double vmf_log_density(const VmfParams& p, const UnitVector& x,
                       const NormalizerBackend& backend);

// log density of nivMF(p.mu, diag(p.kappa_diag)) at x:
//   log C_M(|K mu|) + log D(K) + |K mu| s(K x, K mu),
// with log D(K) = sum_m log kappa_m - log |K mu|.
double nivmf_log_density(const NivmfParams& p, const UnitVector& x,
                         const NormalizerBackend& backend);

// A sample expressed in the pole frame (mode at e_1):
//   x_pole = (w, sqrt(1 - w^2) * tangent),
// with w the cosine of the polar angle and tangent a unit (M-1)-vector.
// For dim == 3, w comes from the exact inverse CDF and `u` records the
// uniform it was derived from (enables re-deriving w differentiably);
// for other dims w comes from rejection sampling and u is NaN.
struct PoleSample {
  double w = 1.0;
  Vector tangent;  // length M-1, unit norm
  double u = std::numeric_limits<double>::quiet_NaN();
};

std::vector<PoleSample> sample_vmf_pole(int dim, double kappa, int n,
                                        std::uint64_t seed);

// Inverse CDF of the polar cosine for dim == 3:
//   w = 1 + log(u + (1-u) e^{-2 kappa}) / kappa.
double vmf_polar_cosine_from_uniform(double kappa, double u);

// Embeds a pole-frame sample into R^M and rotates the pole onto mu with a
// Householder reflection (sign chosen to keep the reflection well away from
// degeneracy).
Vector rotate_pole_sample(const UnitVector& mu, const PoleSample& s);

// i.i.d. samples from vMF(p.mu, p.kappa). Deterministic given seed.
std::vector<UnitVector> sample_vmf(const VmfParams& p, int n,
                                   std::uint64_t seed);

// Approximate nivMF sampling through the change of variables: draw
// x ~ vMF(K mu / |K mu|, |K mu|) and return K^{-1} x / |K^{-1} x|.
std::vector<UnitVector> sample_nivmf_approx(const NivmfParams& p, int n,
                                            std::uint64_t seed);

// Mean resultant length |mean(samples)| of a set of unit vectors.
double empirical_resultant_length(const std::vector<UnitVector>& samples);

}  // namespace pdml
