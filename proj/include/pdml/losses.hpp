#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pdml/metrics.hpp"
#include "pdml/rng.hpp"
#include "pdml/tape.hpp"
#include "pdml/types.hpp"

namespace pdml {

// Where the temperature divides in the Monte-Carlo loss: inside the
// per-sample log-sum-exp (kPerSample) or applied to the final distance
// (kPerDistance). The two differ only for the stochastic metric; both are
// shift-invariant in the per-class scores.
enum class TemperaturePlacement { kPerSample, kPerDistance };

struct LossConfig {
  double temperature = 1.0;
  double omega = 0.0;
  int mc_samples = 5;
  MetricKind metric;
  TemperaturePlacement placement = TemperaturePlacement::kPerSample;

  void validate() const {
    if (!(temperature > 0.0)) throw DomainError("LossConfig: temperature <= 0");
    if (!(omega >= 0.0)) throw DomainError("LossConfig: omega < 0");
    if (mc_samples < 1) throw DomainError("LossConfig: mc_samples < 1");
  }
};

enum class ConcentrationKind { kScalar, kPerDimension };

// C learnable proxies. Directions and concentrations are stored
// unconstrained; reads materialize the constrained views (unit direction,
// positive concentration through exp).
class ProxyBank {
 public:
  ProxyBank(int count, int dim, ConcentrationKind kind);

  static ProxyBank random_init(int count, int dim, ConcentrationKind kind,
                               double kappa_init, Rng& rng);

  int count() const { return count_; }
  int dim() const { return dim_; }
  ConcentrationKind concentration_kind() const { return ckind_; }

  Matrix& direction_storage() { return dir_; }
  const Matrix& direction_storage() const { return dir_; }
  // C x M for kPerDimension, C x 1 for kScalar; kappa = exp(storage).
  Matrix& concentration_storage() { return conc_; }
  const Matrix& concentration_storage() const { return conc_; }

  UnitVector direction(int c) const;
  double kappa_scalar(int c) const;
  Vector kappa_diag(int c) const;
  VmfParams vmf_params(int c) const;
  NivmfParams nivmf_params(int c) const;

  // Checks the materialized invariants (unit directions, positive finite
  // concentrations); throws NumericalError on violation.
  void check_invariants() const;

 private:
  int count_;
  int dim_;
  ConcentrationKind ckind_;
  Matrix dir_;
  Matrix conc_;
};

// -log softmax of the target under scores -d_c / t:
//   d_target / t + log sum_c exp(-d_c / t)   (>= 0).
double nca_softmax_loss(const Vector& distances, Index target, double t);

// Per-class distances for the configured metric. For the stochastic metric
// one sample set (drawn from the sample's vMF with the given seed) is shared
// across all classes.
Vector per_class_distances(const ProxyBank& bank,
                           const EmbeddingDecomposition& sample,
                           const MetricKind& metric,
                           const NormalizerBackend& backend,
                           std::uint64_t seed);

// The probabilistic proxy loss: nca_softmax_loss over the configured metric.
// With the stochastic metric and kPerSample placement the temperature is
// applied to each per-sample log-likelihood before the inner log-sum-exp.
double prob_nca_loss(const ProxyBank& bank, const EmbeddingDecomposition& sample,
                     Index target, const LossConfig& cfg,
                     const NormalizerBackend& backend, std::uint64_t seed);

inline double joint_loss(double prob_loss, double aux_loss, double omega) {
  if (!(omega >= 0.0)) throw DomainError("joint_loss: omega < 0");
  return prob_loss + omega * aux_loss;
}

// dL/ds(mu_p, mu_z) of the cosine-metric loss at the given proxy:
//   (1/t) (softmax_p - [p == target]),  softmax over -d/t.
double analytic_grad_cos(const Vector& distances, Index target, double t,
                         Index proxy_index);

// dL/ds of the squared-distance-metric loss; carries the 2 kappa_p kappa_z
// prefactor. Distances are reconstructed from (kappas, similarities).
double analytic_grad_l2(const Vector& proxy_kappas, double sample_kappa,
                        const Vector& similarities, Index target, double t,
                        Index proxy_index);

// Same gradient with the softmax inputs (distances) supplied directly; the
// prefactor is then exactly linear in sample_kappa.
double analytic_grad_l2_given_distances(const Vector& distances,
                                        double proxy_kappa, double sample_kappa,
                                        Index target, double t,
                                        Index proxy_index);

struct LossGradients {
  double loss = 0.0;
  Matrix d_direction;      // wrt unconstrained direction storage (C x M)
  Matrix d_concentration;  // wrt unconstrained concentration storage
  Vector d_raw;            // wrt the raw embedding z
  // wrt the sample concentration kappa_z = |z| as its own variable; exactly
  // 0 for norm-agnostic metrics (the node has no consumers then).
  double d_sample_kappa = 0.0;
};

// What to do about gradients through the rejection sampler (stochastic
// metric at dim != 3): treat the drawn points as constants, or refuse.
enum class SamplerGradientPolicy { kStopGradient, kRequireExact };

// Exact adjoints of the composed loss for every analytic metric; for the
// stochastic metric, dim == 3 differentiates through the inverse-CDF sampler
// (seed fixed), while general dims treat the drawn points as constants, so
// gradients reach the proxies and the sample direction but not its norm.
// With kRequireExact, the general-dim stochastic case throws
// UnsupportedGradientError instead of silently stopping the gradient.
LossGradients loss_gradients(
    const ProxyBank& bank, const Vector& raw_sample, Index target,
    const LossConfig& cfg, const NormalizerBackend& backend, std::uint64_t seed,
    SamplerGradientPolicy policy = SamplerGradientPolicy::kStopGradient);

// --- tape graph builders (shared by loss_gradients and the trainer) ---

struct BankNodes {
  std::vector<Tape::Vec> dir_storage;
  std::vector<Tape::Vec> conc_storage_vec;        // kPerDimension
  std::vector<Tape::Scalar> conc_storage_scalar;  // kScalar
  std::vector<Tape::Vec> mu;
  std::vector<Tape::Vec> kappa_diag;
  std::vector<Tape::Scalar> kappa;
  ConcentrationKind ckind = ConcentrationKind::kScalar;
};

struct SampleNodes {
  Tape::Vec raw;
  Tape::Scalar kappa;
  Tape::Vec mu;
};

BankNodes emit_bank(Tape& t, const ProxyBank& bank);
SampleNodes emit_sample(Tape& t, Tape::Vec raw);

// Emits the full probabilistic loss for one (sample, target) pair; draws the
// stochastic metric's pole samples internally from `seed`.
Tape::Scalar emit_prob_nca_loss(Tape& t, const BankNodes& bank,
                                const SampleNodes& sample, Index target,
                                const LossConfig& cfg,
                                const NormalizerBackend& backend,
                                std::uint64_t seed,
                                std::optional<Tape::Scalar> temperature = {});

// Cosine-metric loss on the shared directions (the auxiliary objective of
// the joint loss).
Tape::Scalar emit_cos_nca_loss(Tape& t, const BankNodes& bank,
                               const SampleNodes& sample, Index target,
                               double temperature);

}  // namespace pdml
