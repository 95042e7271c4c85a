#include "pdml/losses.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "pdml/directional.hpp"

namespace pdml {

namespace {

void check_metric_bank_compat(const ProxyBank& bank, const MetricKind& metric) {
  if (metric.tag == MetricTag::kCos) return;  // ignores concentrations
  const bool needs_diag = metric.needs_diag_concentration();
  const bool has_diag =
      bank.concentration_kind() == ConcentrationKind::kPerDimension;
  if (needs_diag != has_diag) {
    throw DimensionMismatchError(
        "metric " + to_string(metric.tag) + " requires " +
        (needs_diag ? "per-dimension" : "scalar") +
        " proxy concentrations, bank stores the other kind");
  }
}

double logsumexp(const Vector& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

ProxyBank::ProxyBank(int count, int dim, ConcentrationKind kind)
    : count_(count), dim_(dim), ckind_(kind) {
  if (count < 1) throw DomainError("ProxyBank: count must be >= 1");
  if (dim < 2) throw DomainError("ProxyBank: dim must be >= 2");
  dir_ = Matrix::Zero(count, dim);
  conc_ = Matrix::Zero(count, kind == ConcentrationKind::kPerDimension ? dim : 1);
}

ProxyBank ProxyBank::random_init(int count, int dim, ConcentrationKind kind,
                                 double kappa_init, Rng& rng) {
  if (!(kappa_init > 0.0)) {
    throw DomainError("ProxyBank: kappa_init must be > 0");
  }
  ProxyBank bank(count, dim, kind);
  for (int c = 0; c < count; ++c) {
    double norm2 = 0.0;
    for (int m = 0; m < dim; ++m) {
      const double g = rng.gaussian();
      bank.dir_(c, m) = g;
      norm2 += g * g;
    }
    bank.dir_.row(c) /= std::sqrt(norm2);
  }
  bank.conc_.setConstant(std::log(kappa_init));
  return bank;
}

UnitVector ProxyBank::direction(int c) const {
  return UnitVector::normalized(dir_.row(c).transpose());
}

double ProxyBank::kappa_scalar(int c) const {
  if (ckind_ != ConcentrationKind::kScalar) {
    throw DomainError("ProxyBank: kappa_scalar on per-dimension bank");
  }
  return std::exp(conc_(c, 0));
}

Vector ProxyBank::kappa_diag(int c) const {
  if (ckind_ != ConcentrationKind::kPerDimension) {
    throw DomainError("ProxyBank: kappa_diag on scalar bank");
  }
  return conc_.row(c).array().exp().matrix().transpose();
}

VmfParams ProxyBank::vmf_params(int c) const {
  return VmfParams(direction(c), kappa_scalar(c));
}

NivmfParams ProxyBank::nivmf_params(int c) const {
  return NivmfParams(direction(c), kappa_diag(c));
}

void ProxyBank::check_invariants() const {
  for (int c = 0; c < count_; ++c) {
    if (!dir_.row(c).allFinite() || !conc_.row(c).allFinite()) {
      throw NumericalError("ProxyBank: non-finite storage at proxy " +
                           std::to_string(c));
    }
    const double n = dir_.row(c).norm();
    if (!(n > kDegenerateNormEps)) {
      throw NumericalError("ProxyBank: degenerate direction at proxy " +
                           std::to_string(c));
    }
  }
}

double nca_softmax_loss(const Vector& distances, Index target, double t) {
  if (distances.size() == 0) {
    throw DomainError("nca_softmax_loss: empty distance vector");
  }
  if (target < 0 || target >= distances.size()) {
    throw DomainError("nca_softmax_loss: target out of range");
  }
  if (!(t > 0.0)) throw DomainError("nca_softmax_loss: t must be > 0");
  const Vector scores = -distances / t;
  return -scores(target) + logsumexp(scores);
}

Vector per_class_distances(const ProxyBank& bank,
                           const EmbeddingDecomposition& sample,
                           const MetricKind& metric,
                           const NormalizerBackend& backend,
                           std::uint64_t seed) {
  check_metric_bank_compat(bank, metric);
  if (bank.dim() != sample.dim()) {
    throw DimensionMismatchError("per_class_distances: dim mismatch");
  }
  const int c_count = bank.count();
  Vector d(c_count);

  std::vector<UnitVector> shared_draws;
  if (metric.tag == MetricTag::kElNivmf) {
    const VmfParams zeta(sample.mu, sample.kappa);
    shared_draws = sample_vmf(zeta, metric.mc_samples, seed);
  }

  for (int c = 0; c < c_count; ++c) {
    switch (metric.tag) {
      case MetricTag::kCos:
        d(c) = d_cos(bank.direction(c), sample);
        break;
      case MetricTag::kL2:
        d(c) = d_l2(bank.vmf_params(c), sample);
        break;
      case MetricTag::kNivmfPoint:
        d(c) = d_nivmf_point(bank.nivmf_params(c), sample, backend);
        break;
      case MetricTag::kElNivmf:
        d(c) = d_el_nivmf_with_samples(bank.nivmf_params(c), shared_draws,
                                       backend);
        break;
      case MetricTag::kElVmf:
        d(c) = d_el_vmf(bank.vmf_params(c), sample, backend);
        break;
      case MetricTag::kBVmf:
        d(c) = d_b_vmf(bank.vmf_params(c), sample, backend);
        break;
      case MetricTag::kKlVmf:
        d(c) = d_kl_vmf(bank.vmf_params(c), sample, backend);
        break;
    }
  }
  return d;
}

double prob_nca_loss(const ProxyBank& bank, const EmbeddingDecomposition& sample,
                     Index target, const LossConfig& cfg,
                     const NormalizerBackend& backend, std::uint64_t seed) {
  cfg.validate();
  if (target < 0 || target >= bank.count()) {
    throw DomainError("prob_nca_loss: target out of range");
  }
  const double t = cfg.temperature;

  if (cfg.metric.tag == MetricTag::kElNivmf &&
      cfg.placement == TemperaturePlacement::kPerSample) {
    check_metric_bank_compat(bank, cfg.metric);
    const VmfParams zeta(sample.mu, sample.kappa);
    const auto draws = sample_vmf(zeta, cfg.mc_samples, seed);
    Vector sims(bank.count());
    Vector logls(static_cast<Index>(draws.size()));
    for (int c = 0; c < bank.count(); ++c) {
      const NivmfParams rho = bank.nivmf_params(c);
      for (std::size_t i = 0; i < draws.size(); ++i) {
        logls(static_cast<Index>(i)) =
            nivmf_log_density(rho, draws[i], backend) / t;
      }
      sims(c) = logsumexp(logls);
    }
    return -sims(target) + logsumexp(sims);
  }

  MetricKind metric = cfg.metric;
  metric.mc_samples = cfg.mc_samples;
  const Vector d = per_class_distances(bank, sample, metric, backend, seed);
  return nca_softmax_loss(d, target, t);
}

double analytic_grad_cos(const Vector& distances, Index target, double t,
                         Index proxy_index) {
  if (distances.size() == 0) {
    throw DomainError("analytic_grad_cos: empty distance vector");
  }
  const Vector scores = -distances / t;
  const double lse = logsumexp(scores);
  const double softmax_p = std::exp(scores(proxy_index) - lse);
  const double indicator = proxy_index == target ? 1.0 : 0.0;
  return (softmax_p - indicator) / t;
}

double analytic_grad_l2_given_distances(const Vector& distances,
                                        double proxy_kappa, double sample_kappa,
                                        Index target, double t,
                                        Index proxy_index) {
  const Vector scores = -distances / t;
  const double lse = logsumexp(scores);
  const double softmax_p = std::exp(scores(proxy_index) - lse);
  const double indicator = proxy_index == target ? 1.0 : 0.0;
  return 2.0 * proxy_kappa * sample_kappa * (softmax_p - indicator) / t;
}

double analytic_grad_l2(const Vector& proxy_kappas, double sample_kappa,
                        const Vector& similarities, Index target, double t,
                        Index proxy_index) {
  if (proxy_kappas.size() != similarities.size()) {
    throw DimensionMismatchError("analytic_grad_l2: size mismatch");
  }
  Vector d(proxy_kappas.size());
  for (Index c = 0; c < proxy_kappas.size(); ++c) {
    d(c) = proxy_kappas(c) * proxy_kappas(c) + sample_kappa * sample_kappa -
           2.0 * proxy_kappas(c) * sample_kappa * similarities(c);
  }
  return analytic_grad_l2_given_distances(d, proxy_kappas(proxy_index),
                                          sample_kappa, target, t, proxy_index);
}

// ---------------------------------------------------------------------------
// Tape graph builders
// ---------------------------------------------------------------------------

BankNodes emit_bank(Tape& t, const ProxyBank& bank) {
  BankNodes nodes;
  nodes.ckind = bank.concentration_kind();
  const int c_count = bank.count();
  for (int c = 0; c < c_count; ++c) {
    const Tape::Vec u = t.vec_input(bank.direction_storage().row(c).transpose());
    nodes.dir_storage.push_back(u);
    nodes.mu.push_back(t.normalize(u));
    if (nodes.ckind == ConcentrationKind::kPerDimension) {
      const Tape::Vec psi =
          t.vec_input(bank.concentration_storage().row(c).transpose());
      nodes.conc_storage_vec.push_back(psi);
      nodes.kappa_diag.push_back(t.cwise_exp(psi));
    } else {
      const Tape::Scalar psi = t.input(bank.concentration_storage()(c, 0));
      nodes.conc_storage_scalar.push_back(psi);
      nodes.kappa.push_back(t.exp(psi));
    }
  }
  return nodes;
}

SampleNodes emit_sample(Tape& t, Tape::Vec raw) {
  SampleNodes s;
  s.raw = raw;
  s.kappa = t.norm(raw);
  s.mu = t.normalize(raw);
  return s;
}

namespace {

// Proxy-side nivMF quantities shared by every evaluation against class c.
struct NivmfClassNodes {
  Tape::Vec kappa_diag;
  Tape::Vec k_mu;
  Tape::Scalar kappa_tilde;
  Tape::Scalar log_c;   // log C_M(kappa_tilde)
  Tape::Scalar log_d;   // sum(psi) - log(kappa_tilde)
};

NivmfClassNodes emit_nivmf_class(Tape& t, const BankNodes& bank, int c, int dim,
                                 const NormalizerBackend& backend) {
  NivmfClassNodes n;
  n.kappa_diag = bank.kappa_diag[c];
  n.k_mu = t.cwise_mul(n.kappa_diag, bank.mu[c]);
  n.kappa_tilde = t.norm(n.k_mu);
  n.log_c = t.log_c(n.kappa_tilde, dim, backend);
  n.log_d = t.sub(t.sum(bank.conc_storage_vec[c]), t.log(n.kappa_tilde));
  return n;
}

Tape::Scalar emit_nivmf_log_density(Tape& t, const NivmfClassNodes& cls,
                                    Tape::Vec x) {
  const Tape::Vec kx = t.cwise_mul(cls.kappa_diag, x);
  const Tape::Scalar s =
      t.div(t.dot(kx, cls.k_mu), t.mul(t.norm(kx), cls.kappa_tilde));
  return t.add(t.add(cls.log_c, cls.log_d), t.mul(cls.kappa_tilde, s));
}

// Rebuilds a pole-frame draw on the tape and rotates it onto mu. For dim 3
// with differentiable_radial, w is re-derived from the recorded uniform so
// the sample depends smoothly on kappa; otherwise the whole pole-frame point
// is a constant and only the rotation onto mu carries gradients.
Tape::Vec emit_rotated_sample(Tape& t, const SampleNodes& sample,
                              const PoleSample& ps, bool differentiable_radial) {
  const Vector& mu_val = t.value(sample.mu);
  const Index m = mu_val.size();

  Tape::Vec x_pole;
  if (differentiable_radial) {
    // w = 1 + log(u + (1-u) e^{-2 kappa}) / kappa
    const std::array<std::pair<double, Tape::Scalar>, 1> neg2k{
        {{-2.0, sample.kappa}}};
    const Tape::Scalar e = t.exp(t.affine(0.0, neg2k));
    const std::array<std::pair<double, Tape::Scalar>, 1> inner_terms{
        {{1.0 - ps.u, e}}};
    const Tape::Scalar inner = t.affine(ps.u, inner_terms);
    const Tape::Scalar w_frac = t.div(t.log(inner), sample.kappa);
    const std::array<std::pair<double, Tape::Scalar>, 1> w_terms{
        {{1.0, w_frac}}};
    const Tape::Scalar w = t.affine(1.0, w_terms);
    const std::array<std::pair<double, Tape::Scalar>, 1> r2_terms{
        {{-1.0, t.mul(w, w)}}};
    const Tape::Scalar r = t.sqrt(t.affine(1.0, r2_terms));
    std::vector<Tape::Scalar> comps;
    comps.push_back(w);
    for (Index i = 0; i < m - 1; ++i) {
      comps.push_back(t.mul(r, t.constant(ps.tangent(i))));
    }
    x_pole = t.from_scalars(comps);
  } else {
    Vector x(m);
    const double r = std::sqrt(std::max(0.0, 1.0 - ps.w * ps.w));
    x(0) = ps.w;
    x.tail(m - 1) = r * ps.tangent;
    x_pole = t.vec_constant(std::move(x));
  }

  // Householder against the far signed pole (see rotate_pole_sample).
  const double sign = mu_val(0) >= 0.0 ? 1.0 : -1.0;
  Vector pole = Vector::Zero(m);
  pole(0) = -sign;
  const Tape::Vec v = t.normalize(t.vec_sub(sample.mu, t.vec_constant(pole)));
  const Tape::Scalar two_vx = t.mul(t.constant(2.0), t.dot(v, x_pole));
  const Tape::Vec reflected = t.vec_sub(x_pole, t.scale(two_vx, v));
  return t.scale(t.constant(-sign), reflected);
}

Tape::Scalar emit_analytic_distance(Tape& t, MetricTag tag,
                                    const BankNodes& bank, int c,
                                    const SampleNodes& sample, int dim,
                                    const NormalizerBackend& backend) {
  switch (tag) {
    case MetricTag::kCos:
      return t.neg(t.dot(bank.mu[c], sample.mu));
    case MetricTag::kL2: {
      const Tape::Scalar kp = bank.kappa[c];
      const Tape::Scalar s = t.dot(bank.mu[c], sample.mu);
      const std::array<std::pair<double, Tape::Scalar>, 3> terms{
          {{1.0, t.mul(kp, kp)},
           {1.0, t.mul(sample.kappa, sample.kappa)},
           {-2.0, t.mul(t.mul(kp, sample.kappa), s)}}};
      return t.affine(0.0, terms);
    }
    case MetricTag::kNivmfPoint: {
      const NivmfClassNodes cls = emit_nivmf_class(t, bank, c, dim, backend);
      return t.neg(emit_nivmf_log_density(t, cls, sample.mu));
    }
    case MetricTag::kElVmf: {
      const Tape::Vec nu_sum =
          t.vec_add(t.scale(sample.kappa, sample.mu),
                    t.scale(bank.kappa[c], bank.mu[c]));
      const std::array<std::pair<double, Tape::Scalar>, 3> terms{
          {{1.0, t.log_c(t.norm(nu_sum), dim, backend)},
           {-1.0, t.log_c(sample.kappa, dim, backend)},
           {-1.0, t.log_c(bank.kappa[c], dim, backend)}}};
      return t.affine(0.0, terms);
    }
    case MetricTag::kBVmf: {
      const Tape::Vec nu_sum =
          t.vec_add(t.scale(sample.kappa, sample.mu),
                    t.scale(bank.kappa[c], bank.mu[c]));
      const Tape::Scalar half_norm =
          t.mul(t.constant(0.5), t.norm(nu_sum));
      const std::array<std::pair<double, Tape::Scalar>, 3> terms{
          {{1.0, t.log_c(half_norm, dim, backend)},
           {-0.5, t.log_c(sample.kappa, dim, backend)},
           {-0.5, t.log_c(bank.kappa[c], dim, backend)}}};
      return t.affine(0.0, terms);
    }
    case MetricTag::kKlVmf: {
      const Tape::Scalar s = t.dot(bank.mu[c], sample.mu);
      const Tape::Scalar gap =
          t.sub(sample.kappa, t.mul(bank.kappa[c], s));
      const Tape::Scalar a = t.mrl(sample.kappa, dim, backend);
      const std::array<std::pair<double, Tape::Scalar>, 3> terms{
          {{1.0, t.log_c(sample.kappa, dim, backend)},
           {-1.0, t.log_c(bank.kappa[c], dim, backend)},
           {1.0, t.mul(gap, a)}}};
      return t.affine(0.0, terms);
    }
    case MetricTag::kElNivmf:
      break;
  }
  throw DomainError("emit_analytic_distance: stochastic metric");
}

}  // namespace

Tape::Scalar emit_prob_nca_loss(Tape& t, const BankNodes& bank,
                                const SampleNodes& sample, Index target,
                                const LossConfig& cfg,
                                const NormalizerBackend& backend,
                                std::uint64_t seed,
                                std::optional<Tape::Scalar> temperature) {
  cfg.validate();
  const int c_count = static_cast<int>(bank.mu.size());
  if (target < 0 || target >= c_count) {
    throw DomainError("emit_prob_nca_loss: target out of range");
  }
  if (cfg.metric.tag != MetricTag::kCos) {
    const bool needs_diag = cfg.metric.needs_diag_concentration();
    const bool has_diag = bank.ckind == ConcentrationKind::kPerDimension;
    if (needs_diag != has_diag) {
      throw DimensionMismatchError(
          "emit_prob_nca_loss: metric/bank concentration kind mismatch");
    }
  }
  const int dim = static_cast<int>(t.value(sample.mu).size());
  const Tape::Scalar t_node =
      temperature ? *temperature : t.constant(cfg.temperature);

  std::vector<Tape::Scalar> sims;
  sims.reserve(c_count);

  if (cfg.metric.tag == MetricTag::kElNivmf) {
    const double kappa_value = t.value(sample.kappa);
    const auto pole =
        sample_vmf_pole(dim, kappa_value, cfg.mc_samples, seed);
    const bool diff_radial = dim == 3 && kappa_value > 1e-8;
    std::vector<Tape::Vec> draws;
    draws.reserve(pole.size());
    for (const auto& ps : pole) {
      draws.push_back(emit_rotated_sample(t, sample, ps, diff_radial));
    }
    for (int c = 0; c < c_count; ++c) {
      const NivmfClassNodes cls = emit_nivmf_class(t, bank, c, dim, backend);
      std::vector<Tape::Scalar> logls;
      logls.reserve(draws.size());
      for (const auto& z : draws) {
        logls.push_back(emit_nivmf_log_density(t, cls, z));
      }
      if (cfg.placement == TemperaturePlacement::kPerSample) {
        std::vector<Tape::Scalar> scaled;
        scaled.reserve(logls.size());
        for (const auto& l : logls) scaled.push_back(t.div(l, t_node));
        sims.push_back(t.logsumexp(scaled));
      } else {
        // distance = -(logsumexp - log N); score = -distance / t
        const Tape::Scalar lse = t.logsumexp(logls);
        const std::array<std::pair<double, Tape::Scalar>, 1> shift{
            {{1.0, lse}}};
        const Tape::Scalar neg_d =
            t.affine(-std::log(static_cast<double>(cfg.mc_samples)), shift);
        sims.push_back(t.div(neg_d, t_node));
      }
    }
  } else {
    for (int c = 0; c < c_count; ++c) {
      const Tape::Scalar d =
          emit_analytic_distance(t, cfg.metric.tag, bank, c, sample, dim,
                                 backend);
      sims.push_back(t.neg(t.div(d, t_node)));
    }
  }

  const Tape::Scalar lse = t.logsumexp(sims);
  return t.sub(lse, sims[target]);
}

Tape::Scalar emit_cos_nca_loss(Tape& t, const BankNodes& bank,
                               const SampleNodes& sample, Index target,
                               double temperature) {
  const int c_count = static_cast<int>(bank.mu.size());
  std::vector<Tape::Scalar> sims;
  sims.reserve(c_count);
  for (int c = 0; c < c_count; ++c) {
    const Tape::Scalar s = t.dot(bank.mu[c], sample.mu);
    const std::array<std::pair<double, Tape::Scalar>, 1> term{
        {{1.0 / temperature, s}}};
    sims.push_back(t.affine(0.0, term));
  }
  const Tape::Scalar lse = t.logsumexp(sims);
  return t.sub(lse, sims[target]);
}

LossGradients loss_gradients(const ProxyBank& bank, const Vector& raw_sample,
                             Index target, const LossConfig& cfg,
                             const NormalizerBackend& backend,
                             std::uint64_t seed, SamplerGradientPolicy policy) {
  check_metric_bank_compat(bank, cfg.metric);
  if (policy == SamplerGradientPolicy::kRequireExact &&
      cfg.metric.tag == MetricTag::kElNivmf && bank.dim() != 3) {
    throw UnsupportedGradientError(
        "loss_gradients: exact sampler-path gradients are only available at "
        "dim 3 (inverse-CDF sampler); general dims use rejection sampling");
  }
  Tape t;
  const BankNodes bank_nodes = emit_bank(t, bank);
  const SampleNodes sample = emit_sample(t, t.vec_input(raw_sample));
  const Tape::Scalar loss =
      emit_prob_nca_loss(t, bank_nodes, sample, target, cfg, backend, seed);
  t.backward(loss);

  LossGradients g;
  g.loss = t.value(loss);
  g.d_direction = Matrix(bank.count(), bank.dim());
  g.d_concentration = Matrix(bank.count(), bank.concentration_storage().cols());
  for (int c = 0; c < bank.count(); ++c) {
    g.d_direction.row(c) = t.grad(bank_nodes.dir_storage[c]).transpose();
    if (bank.concentration_kind() == ConcentrationKind::kPerDimension) {
      g.d_concentration.row(c) =
          t.grad(bank_nodes.conc_storage_vec[c]).transpose();
    } else {
      g.d_concentration(c, 0) = t.grad(bank_nodes.conc_storage_scalar[c]);
    }
  }
  g.d_raw = t.grad(sample.raw);
  g.d_sample_kappa = t.grad(sample.kappa);
  return g;
}

}  // namespace pdml
