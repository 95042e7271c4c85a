#pragma once

#include <cstdint>
#include <string>

#include "pdml/directional.hpp"
#include "pdml/types.hpp"

namespace pdml {

enum class MetricTag {
  kCos,         // -s(mu_p, mu_z); norm-agnostic
  kL2,          // |nu_p - nu_z|^2
  kNivmfPoint,  // -log rho(mu_z) under a nivMF proxy
  kElNivmf,     // Monte-Carlo expected-likelihood against a nivMF proxy
  kElVmf,       // analytic expected-likelihood, both sides vMF
  kBVmf,        // analytic Bhattacharyya, both sides vMF
  kKlVmf,       // analytic KL(sample || proxy), both sides vMF
};

struct MetricKind {
  MetricTag tag = MetricTag::kCos;
  int mc_samples = 5;  // used by kElNivmf only
  NormalizerKind normalizer = NormalizerKind::kExact;

  bool needs_diag_concentration() const {
    return tag == MetricTag::kNivmfPoint || tag == MetricTag::kElNivmf;
  }
  bool is_stochastic() const { return tag == MetricTag::kElNivmf; }
};

MetricTag metric_tag_from_string(const std::string& name);
std::string to_string(MetricTag tag);

// Distribution-to-point metrics.
double d_cos(const UnitVector& proxy_mu, const EmbeddingDecomposition& sample);
double d_l2(const VmfParams& proxy, const EmbeddingDecomposition& sample);
double d_nivmf_point(const NivmfParams& proxy,
                     const EmbeddingDecomposition& sample,
                     const NormalizerBackend& backend);

// Monte-Carlo expected-likelihood distance (log-domain throughout):
//   -log( 1/n sum_i rho(z_i) ),  z_i ~ vMF(sample.mu, sample.kappa).
double d_el_nivmf(const NivmfParams& proxy, const EmbeddingDecomposition& sample,
                  int n, std::uint64_t seed, const NormalizerBackend& backend);

// As above but evaluated on a caller-supplied sample set (so one set can be
// shared across proxies).
double d_el_nivmf_with_samples(const NivmfParams& proxy,
                               const std::vector<UnitVector>& samples,
                               const NormalizerBackend& backend);

// Analytic distribution-to-distribution metrics for vMF pairs.
double d_el_vmf(const VmfParams& proxy, const EmbeddingDecomposition& sample,
                const NormalizerBackend& backend);
double d_b_vmf(const VmfParams& proxy, const EmbeddingDecomposition& sample,
               const NormalizerBackend& backend);

// KL(sample || proxy). The closed form carries the mean-resultant-length
// factor A_M(kappa_z) of the vMF expectation E[Z] = A_M(kappa_z) mu_z, which
// keeps the value nonnegative and equal to the integral definition.
double d_kl_vmf(const VmfParams& proxy, const EmbeddingDecomposition& sample,
                const NormalizerBackend& backend);

// Variant that treats E[Z] as the mode mu_z itself (drops the A_M factor).
// Shipped as a measured diagnostic; it can go negative for strongly
// mismatched concentrations.
double d_kl_vmf_modal(const VmfParams& proxy,
                      const EmbeddingDecomposition& sample,
                      const NormalizerBackend& backend);

}  // namespace pdml
