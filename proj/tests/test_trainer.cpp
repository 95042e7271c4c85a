#include <doctest.h>

#include <cmath>

#include <pdml/trainer.hpp>

using namespace pdml;

namespace {

GeneratedData tiny_data(std::uint64_t seed = 8, int dims = 4, int classes = 2,
                        int n = 30) {
  SyntheticConfig cfg;
  cfg.dims = dims;
  cfg.classes = classes;
  cfg.samples_per_class = n;
  cfg.feature_dim = dims;
  cfg.kappa_min = 15.0;
  cfg.kappa_max = 30.0;
  cfg.seed = seed;
  return generate(cfg);
}

}  // namespace

TEST_CASE("lr = 0 trains nothing") {
  const auto data = tiny_data();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 0.0;
  cfg.seed = 1;
  cfg.loss.metric.tag = MetricTag::kCos;
  cfg.loss.temperature = 0.125;
  cfg.loss.metric.normalizer = NormalizerKind::kExact;
  const auto before = [&] {
    TrainConfig c0 = cfg;
    c0.epochs = 0;
    return train(data.train, data.test, c0);
  }();
  const auto after = train(data.train, data.test, cfg);
  CHECK(after.state.bank.direction_storage() ==
        before.state.bank.direction_storage());
  CHECK(after.state.bank.concentration_storage() ==
        before.state.bank.concentration_storage());
  for (const auto& e : after.epochs) {
    CHECK(e.loss == doctest::Approx(after.epochs[0].loss).epsilon(1e-14));
  }
}

TEST_CASE("separable two-class toy reaches perfect retrieval") {
  // Clean, well-separated classes; a linear encoder trained with the cosine
  // metric must reach recall@1 of 1 on the held-out half well within the
  // epoch budget.
  SyntheticConfig dcfg;
  dcfg.dims = 4;
  dcfg.classes = 2;
  dcfg.samples_per_class = 60;
  dcfg.feature_dim = 8;
  dcfg.kappa_min = 40.0;
  dcfg.kappa_max = 60.0;
  dcfg.seed = 11;
  const auto data = generate(dcfg);

  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 32;
  cfg.lr = 1e-2;
  cfg.seed = 2;
  cfg.encoder = EncoderMode::kLinear;
  cfg.embed_dim = 4;
  cfg.loss.metric.tag = MetricTag::kCos;
  cfg.loss.temperature = 0.125;
  cfg.loss.metric.normalizer = NormalizerKind::kExact;
  const auto result = train(data.train, data.test, cfg);
  double best = 0.0;
  for (const auto& e : result.epochs) best = std::max(best, e.recall1);
  CHECK(best == 1.0);
  CHECK(result.epochs.back().recall1 == 1.0);
}

TEST_CASE("training runs are reproducible bit for bit") {
  const auto data = tiny_data();
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 3;
  cfg.loss.metric.tag = MetricTag::kElNivmf;
  cfg.loss.metric.normalizer = NormalizerKind::kApprox;
  cfg.loss.temperature = 4.0;
  const auto a = train(data.train, data.test, cfg);
  const auto b = train(data.train, data.test, cfg);
  CHECK(a.state.bank.direction_storage() == b.state.bank.direction_storage());
  CHECK(a.state.bank.concentration_storage() ==
        b.state.bank.concentration_storage());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].loss == b.epochs[i].loss);
    CHECK(a.epochs[i].recall1 == b.epochs[i].recall1);
    CHECK(a.epochs[i].map == b.epochs[i].map);
  }
}

TEST_CASE("constraints and moments stay sane through training") {
  const auto data = tiny_data(9, 6, 3, 40);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.lr = 3e-2;
  cfg.seed = 4;
  cfg.loss.metric.tag = MetricTag::kNivmfPoint;
  cfg.loss.metric.normalizer = NormalizerKind::kApprox;
  cfg.loss.temperature = 4.0;
  const auto r = train(data.train, data.test, cfg);
  for (int c = 0; c < r.state.bank.count(); ++c) {
    CHECK(std::abs(r.state.bank.direction(c).coords().norm() - 1.0) < 1e-9);
    CHECK(r.state.bank.kappa_diag(c).minCoeff() > 0.0);
  }
  CHECK(r.state.m_dir.allFinite());
  CHECK(r.state.v_conc.allFinite());
  CHECK(r.state.step == 6 * ((data.train.size() + 63) / 64));
}

TEST_CASE("learned temperature moves when enabled and not otherwise") {
  const auto data = tiny_data(10, 4, 2, 24);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 5;
  cfg.loss.metric.tag = MetricTag::kL2;
  cfg.loss.metric.normalizer = NormalizerKind::kExact;
  cfg.loss.temperature = 2.0;
  const auto fixed = train(data.train, data.test, cfg);
  CHECK(fixed.state.log_temperature == doctest::Approx(std::log(2.0)));
  cfg.learn_temperature = true;
  const auto learned = train(data.train, data.test, cfg);
  CHECK(learned.state.log_temperature != doctest::Approx(std::log(2.0)));
  CHECK(std::isfinite(learned.state.log_temperature));
}

TEST_CASE("single step decay reduces the rate at the configured epoch") {
  const auto data = tiny_data(12, 4, 2, 24);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.lr = 1e-2;
  cfg.seed = 6;
  cfg.loss.metric.tag = MetricTag::kCos;
  cfg.loss.temperature = 0.125;
  cfg.loss.metric.normalizer = NormalizerKind::kExact;
  cfg.lr_decay_epoch = 2;
  cfg.lr_decay_factor = 0.0;  // hard stop: epochs >= 2 change nothing
  const auto decayed = train(data.train, data.test, cfg);
  TrainConfig cfg2 = cfg;
  cfg2.epochs = 2;
  cfg2.lr_decay_epoch = -1;
  const auto half = train(data.train, data.test, cfg2);
  CHECK(decayed.state.bank.direction_storage() ==
        half.state.bank.direction_storage());
}

TEST_CASE("step traces are recorded when requested") {
  const auto data = tiny_data(13, 4, 2, 24);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 12;
  cfg.seed = 7;
  cfg.loss.metric.tag = MetricTag::kCos;
  cfg.loss.temperature = 0.25;
  cfg.loss.metric.normalizer = NormalizerKind::kExact;
  cfg.loss.omega = 0.5;
  cfg.record_step_traces = true;
  const auto r = train(data.train, data.test, cfg);
  CHECK(r.steps.size() == static_cast<std::size_t>(r.state.step));
  for (const auto& s : r.steps) {
    CHECK(std::isfinite(s.loss));
    CHECK(s.aux_loss > 0.0);  // cosine auxiliary is active with omega > 0
    CHECK(s.grad_mu_norm >= 0.0);
  }
}

TEST_CASE("divergent settings abort with a numerical error") {
  const auto data = tiny_data(14, 4, 2, 24);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr = 1e9;
  cfg.seed = 8;
  cfg.loss.metric.tag = MetricTag::kNivmfPoint;
  cfg.loss.metric.normalizer = NormalizerKind::kApprox;
  cfg.loss.temperature = 1.0;
  CHECK_THROWS_AS(train(data.train, data.test, cfg), NumericalError);
}

TEST_CASE("spearman rank correlation") {
  Vector a(5), b(5);
  a << 1, 2, 3, 4, 5;
  b << 2, 4, 6, 8, 10;
  CHECK(spearman_rank_correlation(a, b) == doctest::Approx(1.0));
  b << 10, 8, 6, 4, 2;
  CHECK(spearman_rank_correlation(a, b) == doctest::Approx(-1.0));
  b << 1, 1, 1, 1, 1;
  CHECK(std::isnan(spearman_rank_correlation(a, b)));
  // Ties receive average ranks.
  Vector c(4), d(4);
  c << 1, 1, 2, 3;
  d << 1, 1, 2, 3;
  CHECK(spearman_rank_correlation(c, d) == doctest::Approx(1.0));
}

TEST_CASE("anisotropy recovery: flags, independence, and a trained run") {
  // Isotropic generator: correlation undefined, flagged per class.
  {
    SyntheticConfig dcfg;
    dcfg.dims = 6;
    dcfg.classes = 3;
    dcfg.samples_per_class = 20;
    dcfg.feature_dim = 6;
    dcfg.kappa_min = 20.0;
    dcfg.kappa_max = 20.0;
    dcfg.seed = 15;
    const auto data = generate(dcfg);
    Rng rng(1);
    TrainState state(ProxyBank::random_init(
        3, 6, ConcentrationKind::kPerDimension, 10.0, rng));
    const auto report = recover_anisotropy(state, data.train);
    CHECK(report.defined_count == 0);
    CHECK(std::isnan(report.median));
  }

  // Scalar bank: unsupported.
  {
    const auto data = tiny_data(16, 4, 2, 20);
    Rng rng(2);
    TrainState state(
        ProxyBank::random_init(2, 4, ConcentrationKind::kScalar, 10.0, rng));
    CHECK_THROWS_AS(recover_anisotropy(state, data.train), DomainError);
  }

  // Untrained banks with jittered init: correlation is near zero in
  // expectation (average over several random banks).
  {
    SyntheticConfig dcfg;
    dcfg.dims = 12;
    dcfg.classes = 6;
    dcfg.samples_per_class = 20;
    dcfg.feature_dim = 12;
    dcfg.kappa_min = 3.0;
    dcfg.kappa_max = 90.0;
    dcfg.seed = 17;
    const auto data = generate(dcfg);
    double mean = 0.0;
    int count = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng rng(100 + s);
      TrainState state(ProxyBank::random_init(
          6, 12, ConcentrationKind::kPerDimension, 10.0, rng));
      for (Index i = 0; i < state.bank.concentration_storage().rows(); ++i) {
        for (Index j = 0; j < state.bank.concentration_storage().cols(); ++j) {
          state.bank.concentration_storage()(i, j) += 0.5 * rng.gaussian();
        }
      }
      const auto report = recover_anisotropy(state, data.train);
      for (int c = 0; c < 6; ++c) {
        if (std::isfinite(report.per_class(c))) {
          mean += report.per_class(c);
          ++count;
        }
      }
    }
    mean /= count;
    CHECK(std::abs(mean) < 0.15);
  }

  // Strongly anisotropic generator, trained to convergence: positive median
  // correlation between learned and true per-dimension concentrations.
  {
    SyntheticConfig dcfg;
    dcfg.dims = 8;
    dcfg.classes = 4;
    dcfg.samples_per_class = 120;
    dcfg.feature_dim = 8;
    dcfg.kappa_min = 3.0;
    dcfg.kappa_max = 90.0;
    dcfg.seed = 18;
    const auto data = generate(dcfg);
    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batch_size = 60;
    cfg.lr = 2e-2;
    cfg.seed = 9;
    cfg.loss.metric.tag = MetricTag::kNivmfPoint;
    cfg.loss.metric.normalizer = NormalizerKind::kApprox;
    cfg.loss.temperature = 4.0;
    cfg.kappa_init = 20.0;
    const auto r = train(data.train, data.test, cfg);
    const auto report = recover_anisotropy(r.state, data.train);
    CHECK(report.defined_count == 4);
    CHECK(report.median > 0.0);
  }
}
