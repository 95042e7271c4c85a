#include "pdml/metrics.hpp"

#include <cmath>
#include <limits>

namespace pdml {

MetricTag metric_tag_from_string(const std::string& name) {
  if (name == "cos") return MetricTag::kCos;
  if (name == "l2") return MetricTag::kL2;
  if (name == "nivmf_point") return MetricTag::kNivmfPoint;
  if (name == "el_nivmf") return MetricTag::kElNivmf;
  if (name == "el_vmf") return MetricTag::kElVmf;
  if (name == "b_vmf") return MetricTag::kBVmf;
  if (name == "kl_vmf") return MetricTag::kKlVmf;
  throw DomainError("unknown metric: " + name);
}

std::string to_string(MetricTag tag) {
  switch (tag) {
    case MetricTag::kCos: return "cos";
    case MetricTag::kL2: return "l2";
    case MetricTag::kNivmfPoint: return "nivmf_point";
    case MetricTag::kElNivmf: return "el_nivmf";
    case MetricTag::kElVmf: return "el_vmf";
    case MetricTag::kBVmf: return "b_vmf";
    case MetricTag::kKlVmf: return "kl_vmf";
  }
  return "?";
}

double d_cos(const UnitVector& proxy_mu, const EmbeddingDecomposition& sample) {
  return -cosine_similarity(proxy_mu.coords(), sample.mu.coords());
}

double d_l2(const VmfParams& proxy, const EmbeddingDecomposition& sample) {
  const double s = cosine_similarity(proxy.mu.coords(), sample.mu.coords());
  // Law of cosines on the natural parameters; identical to
  // |nu_p - nu_z|^2 but keeps the kappa factorization explicit.
  return proxy.kappa * proxy.kappa + sample.kappa * sample.kappa -
         2.0 * proxy.kappa * sample.kappa * s;
}

double d_nivmf_point(const NivmfParams& proxy,
                     const EmbeddingDecomposition& sample,
                     const NormalizerBackend& backend) {
  return -nivmf_log_density(proxy, sample.mu, backend);
}

double d_el_nivmf_with_samples(const NivmfParams& proxy,
                               const std::vector<UnitVector>& samples,
                               const NormalizerBackend& backend) {
  if (samples.empty()) throw DomainError("d_el_nivmf: need >= 1 sample");
  // -( logsumexp_i log rho(z_i) - log n ), all in log domain.
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logs;
  logs.reserve(samples.size());
  for (const auto& z : samples) {
    const double l = nivmf_log_density(proxy, z, backend);
    logs.push_back(l);
    max_log = std::max(max_log, l);
  }
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - max_log);
  const double lse = max_log + std::log(acc);
  return -(lse - std::log(static_cast<double>(samples.size())));
}

double d_el_nivmf(const NivmfParams& proxy, const EmbeddingDecomposition& sample,
                  int n, std::uint64_t seed, const NormalizerBackend& backend) {
  if (n < 1) throw DomainError("d_el_nivmf: n must be >= 1");
  const VmfParams zeta(sample.mu, sample.kappa);
  const auto draws = sample_vmf(zeta, n, seed);
  return d_el_nivmf_with_samples(proxy, draws, backend);
}

double d_el_vmf(const VmfParams& proxy, const EmbeddingDecomposition& sample,
                const NormalizerBackend& backend) {
  if (proxy.dim() != sample.dim()) {
    throw DimensionMismatchError("d_el_vmf: dimension mismatch");
  }
  const int dim = static_cast<int>(proxy.dim());
  const Vector nu_sum =
      proxy.kappa * proxy.mu.coords() + sample.kappa * sample.mu.coords();
  return backend.log_c(dim, nu_sum.norm()) - backend.log_c(dim, sample.kappa) -
         backend.log_c(dim, proxy.kappa);
}

double d_b_vmf(const VmfParams& proxy, const EmbeddingDecomposition& sample,
               const NormalizerBackend& backend) {
  if (proxy.dim() != sample.dim()) {
    throw DimensionMismatchError("d_b_vmf: dimension mismatch");
  }
  const int dim = static_cast<int>(proxy.dim());
  const Vector nu_sum =
      proxy.kappa * proxy.mu.coords() + sample.kappa * sample.mu.coords();
  return backend.log_c(dim, 0.5 * nu_sum.norm()) -
         0.5 * backend.log_c(dim, sample.kappa) -
         0.5 * backend.log_c(dim, proxy.kappa);
}

namespace {

double kl_vmf_impl(const VmfParams& proxy, const EmbeddingDecomposition& sample,
                   const NormalizerBackend& backend, bool modal) {
  if (proxy.dim() != sample.dim()) {
    throw DimensionMismatchError("d_kl_vmf: dimension mismatch");
  }
  const int dim = static_cast<int>(proxy.dim());
  const double s = cosine_similarity(sample.mu.coords(), proxy.mu.coords());
  // (kappa_z mu_z - kappa_p mu_p)^T E[Z] with E[Z] = A_M(kappa_z) mu_z.
  const double scale = modal ? 1.0 : -backend.dlog_c(dim, sample.kappa);
  return backend.log_c(dim, sample.kappa) - backend.log_c(dim, proxy.kappa) +
         (sample.kappa - proxy.kappa * s) * scale;
}

}  // namespace

double d_kl_vmf(const VmfParams& proxy, const EmbeddingDecomposition& sample,
                const NormalizerBackend& backend) {
  return kl_vmf_impl(proxy, sample, backend, /*modal=*/false);
}

double d_kl_vmf_modal(const VmfParams& proxy,
                      const EmbeddingDecomposition& sample,
                      const NormalizerBackend& backend) {
  return kl_vmf_impl(proxy, sample, backend, /*modal=*/true);
}

}  // namespace pdml
