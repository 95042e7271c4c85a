#pragma once

#include <cstdint>
#include <vector>

#include "pdml/evaluation.hpp"
#include "pdml/losses.hpp"
#include "pdml/synthdata.hpp"

namespace pdml {

enum class EncoderMode { kIdentity, kLinear };

EncoderMode encoder_mode_from_string(const std::string& name);
std::string to_string(EncoderMode mode);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double lr = 1e-2;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LossConfig loss;
  EncoderMode encoder = EncoderMode::kIdentity;
  // Embedding dimension of the linear encoder; 0 falls back to the dataset's
  // generator dims (or the feature dim when no ground truth is attached).
  int embed_dim = 0;
  double encoder_init_scale = 1.0;
  double kappa_init = 50.0;
  bool learn_temperature = false;
  int lr_decay_epoch = -1;  // single step decay; -1 disables
  double lr_decay_factor = 0.1;
  // Fit range for the approximate normalizer backend.
  double norm_fit_kmin = 1.0;
  double norm_fit_kmax = 120.0;
  std::uint64_t seed = 0;
  bool record_step_traces = false;
  int eval_map_r = 1000;

  void validate() const;

  // The optimization protocol used with pretrained backbones at benchmark
  // scale (low learning rate, heavier weight decay).
  static TrainConfig benchmark_preset();
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double recall1 = 0.0;
  double map = 0.0;
  double mean_kappa = 0.0;
};

struct StepTrace {
  long step = 0;
  double loss = 0.0;
  double aux_loss = 0.0;
  double grad_mu_norm = 0.0;
  double grad_kappa_norm = 0.0;
};

struct TrainState {
  ProxyBank bank;
  Matrix encoder;  // embed_dim x feature_dim; empty in identity mode
  double log_temperature = 0.0;
  long step = 0;

  // Optimizer moments (decoupled weight decay updates them never).
  Matrix m_dir, v_dir;
  Matrix m_conc, v_conc;
  Matrix m_enc, v_enc;
  double m_logt = 0.0, v_logt = 0.0;

  explicit TrainState(ProxyBank b) : bank(std::move(b)) {}
};

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> epochs;
  std::vector<StepTrace> steps;
  NormalizerBackend backend;
};

// Embeddings under the trained state (identity: the features themselves).
Matrix embed(const TrainState& state, const Matrix& features);

// Seed of the stochastic loss for one (epoch, sample index) pair; exposed so
// an external evaluation can reproduce the exact seeded loss surface the
// optimizer stepped on.
std::uint64_t train_sample_seed(std::uint64_t base_seed, int epoch, Index idx);

// Minibatch AdamW on the unconstrained proxy (and encoder) parameters.
// Deterministic per seed: batch order, per-sample seeds and the reduction
// order are all derived from cfg.seed. Throws NumericalError when the loss
// goes non-finite.
TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainConfig& cfg);

// Spearman rank correlation with average ranks over ties.
double spearman_rank_correlation(const Vector& a, const Vector& b);

struct AnisotropyReport {
  Vector per_class;  // NaN where undefined (no ranking signal)
  double median = 0.0;
  int defined_count = 0;
};

// Per-class rank correlation between the learned per-dimension proxy
// concentrations and the generator's ground truth.
AnisotropyReport recover_anisotropy(const TrainState& state,
                                    const LabeledDataset& dataset);

}  // namespace pdml
