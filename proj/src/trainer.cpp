#include "pdml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pdml/rng.hpp"

namespace pdml {

EncoderMode encoder_mode_from_string(const std::string& name) {
  if (name == "identity") return EncoderMode::kIdentity;
  if (name == "linear") return EncoderMode::kLinear;
  throw DomainError("unknown encoder mode: " + name);
}

std::string to_string(EncoderMode mode) {
  return mode == EncoderMode::kIdentity ? "identity" : "linear";
}

void TrainConfig::validate() const {
  if (epochs < 0) throw DomainError("TrainConfig: epochs < 0");
  if (batch_size < 1) throw DomainError("TrainConfig: batch_size < 1");
  if (!(lr >= 0.0)) throw DomainError("TrainConfig: lr < 0");
  if (!(weight_decay >= 0.0)) throw DomainError("TrainConfig: weight_decay < 0");
  if (!(kappa_init > 0.0)) throw DomainError("TrainConfig: kappa_init <= 0");
  if (!(encoder_init_scale > 0.0)) {
    throw DomainError("TrainConfig: encoder_init_scale <= 0");
  }
  loss.validate();
}

TrainConfig TrainConfig::benchmark_preset() {
  TrainConfig cfg;
  cfg.lr = 1e-5;
  cfg.weight_decay = 4e-3;
  return cfg;
}

namespace {

struct AdamParams {
  double lr, beta1, beta2, eps, weight_decay;
};

void adamw_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                  long step, const AdamParams& p) {
  m = p.beta1 * m + (1.0 - p.beta1) * grad;
  v = p.beta2 * v + (1.0 - p.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(step));
  param.array() -=
      p.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + p.eps);
  param.array() -= p.lr * p.weight_decay * param.array();
}

void adamw_update_scalar(double& param, double grad, double& m, double& v,
                         long step, const AdamParams& p) {
  m = p.beta1 * m + (1.0 - p.beta1) * grad;
  v = p.beta2 * v + (1.0 - p.beta2) * grad * grad;
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(step));
  param -= p.lr * (m / c1) / (std::sqrt(v / c2) + p.eps);
  param -= p.lr * p.weight_decay * param;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return Rng(base).split((a << 20) ^ b).next_u64();
}

}  // namespace

std::uint64_t train_sample_seed(std::uint64_t base_seed, int epoch, Index idx) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(epoch),
                     static_cast<std::uint64_t>(idx));
}

Matrix embed(const TrainState& state, const Matrix& features) {
  if (state.encoder.size() == 0) return features;
  if (state.encoder.cols() != features.cols()) {
    throw DimensionMismatchError("embed: encoder/feature dim mismatch");
  }
  return features * state.encoder.transpose();
}

TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  train_set.validate();
  val_set.validate();

  const Index n = train_set.size();
  const int f_dim = static_cast<int>(train_set.feature_dim());
  int m_dim;
  if (cfg.encoder == EncoderMode::kIdentity) {
    if (cfg.embed_dim != 0 && cfg.embed_dim != f_dim) {
      throw DomainError("train: identity encoder requires embed_dim == feature dim");
    }
    m_dim = f_dim;
  } else {
    m_dim = cfg.embed_dim;
    if (m_dim == 0) {
      m_dim = train_set.spec ? train_set.spec->config.dims : f_dim;
    }
  }
  const int c_count =
      1 + *std::max_element(train_set.labels.begin(), train_set.labels.end());

  const ConcentrationKind ckind = cfg.loss.metric.needs_diag_concentration()
                                      ? ConcentrationKind::kPerDimension
                                      : ConcentrationKind::kScalar;

  const NormalizerBackend backend =
      cfg.loss.metric.normalizer == NormalizerKind::kExact
          ? NormalizerBackend::exact()
          : NormalizerBackend::approx(fit_log_c_quadratic(
                m_dim, [&] {
                  std::vector<double> grid(41);
                  for (int i = 0; i < 41; ++i) {
                    grid[i] = cfg.norm_fit_kmin +
                              (cfg.norm_fit_kmax - cfg.norm_fit_kmin) * i / 40.0;
                  }
                  return grid;
                }()));

  Rng init_rng(cfg.seed);
  TrainResult result{
      TrainState(ProxyBank::random_init(c_count, m_dim, ckind, cfg.kappa_init,
                                        init_rng)),
      {}, {}, backend};
  TrainState& state = result.state;
  state.log_temperature = std::log(cfg.loss.temperature);

  if (cfg.encoder == EncoderMode::kLinear) {
    state.encoder = Matrix(m_dim, f_dim);
    for (int i = 0; i < m_dim; ++i) {
      for (int j = 0; j < f_dim; ++j) {
        state.encoder(i, j) =
            cfg.encoder_init_scale * init_rng.gaussian() / std::sqrt(f_dim);
      }
    }
    state.m_enc = Matrix::Zero(m_dim, f_dim);
    state.v_enc = Matrix::Zero(m_dim, f_dim);
  }
  state.m_dir = Matrix::Zero(c_count, m_dim);
  state.v_dir = Matrix::Zero(c_count, m_dim);
  state.m_conc = Matrix::Zero(state.bank.concentration_storage().rows(),
                              state.bank.concentration_storage().cols());
  state.v_conc = state.m_conc;

  const AdamParams adam_base{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps,
                             cfg.weight_decay};

  auto evaluate_epoch = [&](int epoch, double mean_loss) {
    EpochLog log;
    log.epoch = epoch;
    log.loss = mean_loss;
    const Matrix val_emb = embed(state, val_set.features);
    log.recall1 =
        recall_at_k(val_emb, val_set.labels, 1, RetrievalMetric::kCosine);
    log.map = map_at_r(val_emb, val_set.labels, cfg.eval_map_r,
                       RetrievalMetric::kCosine);
    double mk = 0.0;
    for (int c = 0; c < c_count; ++c) {
      mk += state.bank.concentration_storage().row(c).array().exp().matrix().norm();
    }
    log.mean_kappa = mk / c_count;
    result.epochs.push_back(log);
  };

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Deterministic shuffle per (seed, epoch).
    Rng shuffle_rng(derive_seed(cfg.seed, 0xA11CE, epoch));
    for (Index i = n - 1; i > 0; --i) {
      const Index j = static_cast<Index>(shuffle_rng.uniform_index(i + 1));
      std::swap(order[i], order[j]);
    }
    const double lr_scale =
        (cfg.lr_decay_epoch >= 0 && epoch >= cfg.lr_decay_epoch)
            ? cfg.lr_decay_factor
            : 1.0;
    AdamParams adam = adam_base;
    adam.lr *= lr_scale;

    double epoch_loss = 0.0;

    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index stop = std::min<Index>(start + cfg.batch_size, n);
      const Index b_size = stop - start;

      Tape tape;
      const BankNodes bank_nodes = emit_bank(tape, state.bank);
      std::vector<Tape::Vec> enc_rows;
      if (cfg.encoder == EncoderMode::kLinear) {
        enc_rows.reserve(m_dim);
        for (int r = 0; r < m_dim; ++r) {
          enc_rows.push_back(tape.vec_input(state.encoder.row(r).transpose()));
        }
      }
      std::optional<Tape::Scalar> t_node;
      Tape::Scalar log_t_node{};
      if (cfg.learn_temperature) {
        log_t_node = tape.input(state.log_temperature);
        t_node = tape.exp(log_t_node);
      }

      std::vector<std::pair<double, Tape::Scalar>> batch_terms;
      std::vector<std::pair<double, Tape::Scalar>> aux_terms;
      batch_terms.reserve(b_size);
      for (Index bi = 0; bi < b_size; ++bi) {
        const Index idx = order[start + bi];
        Tape::Vec raw;
        if (cfg.encoder == EncoderMode::kLinear) {
          const Tape::Vec feat =
              tape.vec_constant(train_set.features.row(idx).transpose());
          std::vector<Tape::Scalar> comps;
          comps.reserve(m_dim);
          for (int r = 0; r < m_dim; ++r) {
            comps.push_back(tape.dot(enc_rows[r], feat));
          }
          raw = tape.from_scalars(comps);
        } else {
          raw = tape.vec_constant(train_set.features.row(idx).transpose());
        }
        const SampleNodes sample = emit_sample(tape, raw);
        const std::uint64_t sample_seed = train_sample_seed(cfg.seed, epoch, idx);
        const Tape::Scalar prob = emit_prob_nca_loss(
            tape, bank_nodes, sample, train_set.labels[idx], cfg.loss, backend,
            sample_seed, t_node);
        if (cfg.loss.omega > 0.0) {
          const Tape::Scalar aux = emit_cos_nca_loss(
              tape, bank_nodes, sample, train_set.labels[idx],
              cfg.loss.temperature);
          batch_terms.emplace_back(1.0 / b_size, prob);
          batch_terms.emplace_back(cfg.loss.omega / b_size, aux);
          aux_terms.emplace_back(1.0 / b_size, aux);
        } else {
          batch_terms.emplace_back(1.0 / b_size, prob);
        }
      }
      const Tape::Scalar batch_loss = tape.affine(0.0, batch_terms);
      const double loss_value = tape.value(batch_loss);
      if (!std::isfinite(loss_value)) {
        throw NumericalError(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", step " + std::to_string(state.step) +
            " (lr " + std::to_string(adam.lr) + ", metric " +
            to_string(cfg.loss.metric.tag) + ")");
      }
      tape.backward(batch_loss);

      ++state.step;
      // Fixed gather order keeps runs bitwise reproducible.
      Matrix g_dir(c_count, m_dim);
      Matrix g_conc(state.m_conc.rows(), state.m_conc.cols());
      for (int c = 0; c < c_count; ++c) {
        g_dir.row(c) = tape.grad(bank_nodes.dir_storage[c]).transpose();
        if (ckind == ConcentrationKind::kPerDimension) {
          g_conc.row(c) = tape.grad(bank_nodes.conc_storage_vec[c]).transpose();
        } else {
          g_conc(c, 0) = tape.grad(bank_nodes.conc_storage_scalar[c]);
        }
      }
      if (!g_dir.allFinite() || !g_conc.allFinite()) {
        throw NumericalError("train: non-finite proxy gradient at step " +
                             std::to_string(state.step));
      }
      adamw_update(state.bank.direction_storage(), g_dir, state.m_dir,
                   state.v_dir, state.step, adam);
      adamw_update(state.bank.concentration_storage(), g_conc, state.m_conc,
                   state.v_conc, state.step, adam);
      if (cfg.encoder == EncoderMode::kLinear) {
        Matrix g_enc(m_dim, f_dim);
        for (int r = 0; r < m_dim; ++r) {
          g_enc.row(r) = tape.grad(enc_rows[r]).transpose();
        }
        if (!g_enc.allFinite()) {
          throw NumericalError("train: non-finite encoder gradient at step " +
                               std::to_string(state.step));
        }
        adamw_update(state.encoder, g_enc, state.m_enc, state.v_enc,
                     state.step, adam);
      }
      if (cfg.learn_temperature) {
        AdamParams adam_t = adam;
        adam_t.weight_decay = 0.0;  // no shrinkage on the temperature
        adamw_update_scalar(state.log_temperature, tape.grad(log_t_node),
                            state.m_logt, state.v_logt, state.step, adam_t);
      }
      state.bank.check_invariants();

      epoch_loss += loss_value * b_size;
      if (cfg.record_step_traces) {
        StepTrace trace;
        trace.step = state.step;
        trace.loss = loss_value;
        double aux_value = 0.0;
        for (const auto& [coef, node] : aux_terms) {
          aux_value += coef * tape.value(node);
        }
        trace.aux_loss = aux_value;
        trace.grad_mu_norm = g_dir.rowwise().norm().mean();
        trace.grad_kappa_norm = g_conc.rowwise().norm().mean();
        result.steps.push_back(trace);
      }
    }
    evaluate_epoch(epoch, epoch_loss / n);
  }
  return result;
}

double spearman_rank_correlation(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw DomainError("spearman: need two equal-length vectors, size >= 2");
  }
  const auto ranks = [](const Vector& v) {
    const Index n = v.size();
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::sort(idx.begin(), idx.end(),
              [&](Index x, Index y) { return v(x) < v(y); });
    Vector r(n);
    Index i = 0;
    while (i < n) {
      Index j = i;
      while (j < n && v(idx[j]) == v(idx[i])) ++j;
      const double avg = 0.5 * static_cast<double>(i + j - 1) + 1.0;
      for (Index k = i; k < j; ++k) r(idx[k]) = avg;
      i = j;
    }
    return r;
  };
  const Vector ra = ranks(a);
  const Vector rb = ranks(b);
  const Vector da = ra.array() - ra.mean();
  const Vector db = rb.array() - rb.mean();
  const double denom = da.norm() * db.norm();
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return da.dot(db) / denom;
}

AnisotropyReport recover_anisotropy(const TrainState& state,
                                    const LabeledDataset& dataset) {
  if (state.bank.concentration_kind() != ConcentrationKind::kPerDimension) {
    throw DomainError(
        "recover_anisotropy: bank stores scalar concentrations (isotropic)");
  }
  if (!dataset.spec) {
    throw DomainError("recover_anisotropy: dataset has no generator spec");
  }
  const Matrix& truth = dataset.spec->kappa;
  if (truth.cols() != state.bank.dim() ||
      truth.rows() < state.bank.count()) {
    throw DimensionMismatchError("recover_anisotropy: spec/bank shape mismatch");
  }
  AnisotropyReport report;
  const int c_count = state.bank.count();
  report.per_class = Vector(c_count);
  std::vector<double> defined;
  for (int c = 0; c < c_count; ++c) {
    const Vector learned = state.bank.kappa_diag(c);
    const Vector gt = truth.row(c).transpose();
    const double spread = gt.maxCoeff() - gt.minCoeff();
    if (spread < 1e-12) {
      report.per_class(c) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double rho = spearman_rank_correlation(learned, gt);
    report.per_class(c) = rho;
    if (std::isfinite(rho)) defined.push_back(rho);
  }
  report.defined_count = static_cast<int>(defined.size());
  if (defined.empty()) {
    report.median = std::numeric_limits<double>::quiet_NaN();
  } else {
    std::sort(defined.begin(), defined.end());
    const std::size_t mid = defined.size() / 2;
    report.median = defined.size() % 2 == 1
                        ? defined[mid]
                        : 0.5 * (defined[mid - 1] + defined[mid]);
  }
  return report;
}

}  // namespace pdml
