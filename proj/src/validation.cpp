#include "pdml/validation.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "pdml/directional.hpp"
#include "pdml/io.hpp"
#include "pdml/losses.hpp"
#include "pdml/metrics.hpp"
#include "pdml/specfn.hpp"
#include "pdml/sphere_quadrature.hpp"
#include "pdml/synthdata.hpp"
#include "pdml/trainer.hpp"

namespace pdml {

namespace {

class Suite {
 public:
  explicit Suite(std::vector<CheckResult>& out) : out_(out) {}

  void check(const std::string& suite, const std::string& name, bool pass,
             const std::string& detail = "") {
    out_.push_back({suite, name, pass, detail});
  }

  void run(const std::string& suite, const std::string& name,
           const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [pass, detail] = body();
      out_.push_back({suite, name, pass, detail});
    } catch (const std::exception& e) {
      out_.push_back({suite, name, false, std::string("exception: ") + e.what()});
    }
  }

 private:
  std::vector<CheckResult>& out_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

UnitVector random_unit(int dim, Rng& rng) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.gaussian();
  return UnitVector::normalized(v);
}

Matrix random_rotation(int dim, Rng& rng) {
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.gaussian();
  Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  if (q.determinant() < 0) q.col(0) = -q.col(0);
  return q;
}

void specfn_suite(Suite& s) {
  s.run("specfn", "log_c_exact strictly decreasing in kappa", [] {
    for (int m : {2, 3, 8, 64, 128, 512}) {
      double prev = log_c_exact(m, 1e-3);
      for (int i = 1; i <= 100; ++i) {
        const double k = 2.0 * i;  // (0, 200]
        const double cur = log_c_exact(m, k);
        if (!(cur < prev)) {
          return std::pair{false, "violation at M=" + std::to_string(m) +
                                      " kappa=" + fmt(k)};
        }
        prev = cur;
      }
    }
    return std::pair{true, std::string{}};
  });

  s.run("specfn", "series/ratio branch agreement at the seam", [] {
    double worst = 0.0;
    for (int m : {2, 3, 8, 64, 128, 512}) {
      const double nu = 0.5 * m - 1.0;
      const double seam = log_bessel_i_switchover(nu);
      const double a = log_bessel_i_series_branch(nu, seam);
      const double b = log_bessel_i_ratio_branch(nu, seam);
      worst = std::max(worst, std::abs(a - b) / std::abs(b));
    }
    return std::pair{worst < 1e-10, "max rel seam gap " + fmt(worst)};
  });

  s.run("specfn", "reference presets within 0.5% of exact on [10,50]", [] {
    double worst = 0.0;
    for (int dim : {128, 512}) {
      const auto fit = published_normalizer_fit(dim);
      for (int k = 10; k <= 50; ++k) {
        const double exact = log_c_exact(dim, k);
        worst = std::max(worst, std::abs(fit(k) - exact) / std::abs(exact));
      }
    }
    return std::pair{worst < 5e-3, "max pointwise rel err " + fmt(worst)};
  });

  s.run("specfn", "least-squares fit relative MSE below 0.1%", [] {
    std::vector<double> grid;
    for (int k = 10; k <= 50; ++k) grid.push_back(k);
    double worst = 0.0;
    for (int dim : {128, 512}) {
      worst = std::max(worst, fit_log_c_quadratic(dim, grid).rel_mse);
    }
    return std::pair{worst < 1e-3, "max rel MSE " + fmt(worst)};
  });

  s.run("specfn", "approx derivative matches finite differences", [] {
    std::vector<double> grid;
    for (int k = 10; k <= 50; ++k) grid.push_back(k);
    const auto fit = fit_log_c_quadratic(128, grid);
    double worst = 0.0;
    for (double k : {12.0, 25.0, 42.0}) {
      const double h = 1e-4 * k;
      const double fd = (fit(k + h) - fit(k - h)) / (2.0 * h);
      worst = std::max(worst,
                       std::abs(fd - fit.derivative(k)) / std::abs(fd));
    }
    return std::pair{worst < 1e-8, "max rel err " + fmt(worst)};
  });
}

void directional_suite(Suite& s) {
  const NormalizerBackend exact = NormalizerBackend::exact();

  s.run("directional", "vMF density integrates to 1 on the sphere", [&] {
    Rng rng(11);
    double worst = 0.0;
    for (double kappa : {0.5, 5.0, 50.0}) {
      const VmfParams p(random_unit(3, rng), kappa);
      const double log_int = log_integrate_sphere([&](const Vector& x) {
        return vmf_log_density(p, UnitVector(x), exact);
      });
      worst = std::max(worst, std::abs(std::exp(log_int) - 1.0));
    }
    return std::pair{worst < 1e-6, "max |integral-1| " + fmt(worst)};
  });

  s.run("directional", "isotropic reduction: constant offset (M-1) log c", [&] {
    Rng rng(12);
    double worst = 0.0;
    for (int m : {3, 16, 128}) {
      const UnitVector mu = random_unit(m, rng);
      const double c = rng.uniform(0.5, 50.0);
      const NivmfParams ni(mu, Vector::Constant(m, c));
      const VmfParams iso(mu, c);
      const double expect = (m - 1.0) * std::log(c);
      for (int i = 0; i < 100; ++i) {
        const UnitVector x = random_unit(m, rng);
        const double diff = nivmf_log_density(ni, x, exact) -
                            vmf_log_density(iso, x, exact);
        worst = std::max(worst, std::abs(diff - expect));
      }
    }
    return std::pair{worst < 1e-8, "max |offset error| " + fmt(worst)};
  });

  s.run("directional", "vMF density invariant under joint rotation", [&] {
    Rng rng(13);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const UnitVector mu = random_unit(5, rng);
      const UnitVector x = random_unit(5, rng);
      const double kappa = rng.uniform(0.1, 30.0);
      const Matrix q = random_rotation(5, rng);
      const VmfParams p(mu, kappa);
      const VmfParams pr(UnitVector::normalized(q * mu.coords()), kappa);
      const UnitVector xr = UnitVector::normalized(q * x.coords());
      worst = std::max(worst, std::abs(vmf_log_density(p, x, exact) -
                                       vmf_log_density(pr, xr, exact)));
    }
    return std::pair{worst < 1e-9, "max |density shift| " + fmt(worst)};
  });

  s.run("directional", "samplers are bitwise deterministic per seed", [&] {
    Rng rng(14);
    for (int m : {3, 8}) {
      const VmfParams p(random_unit(m, rng), 7.5);
      const auto a = sample_vmf(p, 200, 99);
      const auto b = sample_vmf(p, 200, 99);
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].coords() != b[i].coords()) {
          return std::pair{false, "mismatch at M=" + std::to_string(m)};
        }
      }
    }
    return std::pair{true, std::string{}};
  });

  s.run("directional", "decompose round-trips raw = kappa * mu", [&] {
    Rng rng(15);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      Vector z(6);
      for (int i = 0; i < 6; ++i) z(i) = 3.0 * rng.gaussian();
      if (z.norm() < 1e-6) continue;
      const auto d = decompose(z);
      worst = std::max(worst, (d.kappa * d.mu.coords() - d.raw).norm() /
                                  d.raw.norm());
    }
    return std::pair{worst < 1e-12, "max rel defect " + fmt(worst)};
  });

  s.run("directional", "nivMF integral diagnostic (reported, not asserted)", [&] {
    Rng rng(16);
    const NivmfParams p(random_unit(3, rng), (Vector(3) << 20, 5, 50).finished());
    const double log_int = log_integrate_sphere([&](const Vector& x) {
      return nivmf_log_density(p, UnitVector(x), exact);
    });
    return std::pair{true, "integral = " + fmt(std::exp(log_int)) +
                               " (heuristic measure, need not be 1)"};
  });
}

void metrics_suite(Suite& s) {
  const NormalizerBackend exact = NormalizerBackend::exact();

  s.run("metrics", "EL and Bhattacharyya symmetric, KL asymmetric", [&] {
    Rng rng(21);
    const UnitVector mu_a = random_unit(3, rng);
    const UnitVector mu_b = random_unit(3, rng);
    const VmfParams a(mu_a, 3.0);
    const EmbeddingDecomposition da(3.0 * mu_a.coords());
    const VmfParams b(mu_b, 11.0);
    const EmbeddingDecomposition db(11.0 * mu_b.coords());
    const double el_ab = d_el_vmf(a, db, exact);
    const double el_ba = d_el_vmf(b, da, exact);
    const double b_ab = d_b_vmf(a, db, exact);
    const double b_ba = d_b_vmf(b, da, exact);
    const double kl_ab = d_kl_vmf(a, db, exact);
    const double kl_ba = d_kl_vmf(b, da, exact);
    const bool sym = std::abs(el_ab - el_ba) < 1e-10 &&
                     std::abs(b_ab - b_ba) < 1e-10;
    const bool asym = std::abs(kl_ab - kl_ba) > 0.01;
    return std::pair{sym && asym, "KL asymmetry witness " +
                                      fmt(std::abs(kl_ab - kl_ba))};
  });

  s.run("metrics", "analytic distances match sphere quadrature", [&] {
    Rng rng(22);
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      const UnitVector mu_p = random_unit(3, rng);
      const UnitVector mu_z = random_unit(3, rng);
      const double kp = rng.uniform(0.5, 30.0);
      const double kz = rng.uniform(0.5, 30.0);
      const VmfParams proxy(mu_p, kp);
      const EmbeddingDecomposition sample(kz * mu_z.coords());

      const auto log_rho = [&](const Vector& x) {
        return vmf_log_density(proxy, UnitVector(x), exact);
      };
      const auto log_zeta = [&](const Vector& x) {
        return vmf_log_density(VmfParams(mu_z, kz), UnitVector(x), exact);
      };
      const double el = -log_integrate_sphere(
          [&](const Vector& x) { return log_rho(x) + log_zeta(x); });
      const double bb = -log_integrate_sphere(
          [&](const Vector& x) { return 0.5 * (log_rho(x) + log_zeta(x)); });
      const double kl = integrate_sphere([&](const Vector& x) {
        const double lz = log_zeta(x);
        return std::exp(lz) * (lz - log_rho(x));
      });
      worst = std::max(worst, std::abs(d_el_vmf(proxy, sample, exact) - el) /
                                  std::abs(el));
      worst = std::max(worst, std::abs(d_b_vmf(proxy, sample, exact) - bb) /
                                  std::abs(bb));
      worst = std::max(worst, std::abs(d_kl_vmf(proxy, sample, exact) - kl) /
                                  std::abs(kl));
    }
    return std::pair{worst < 1e-6, "max rel err " + fmt(worst)};
  });

  s.run("metrics", "isotropic EL reduction to the vMF closed form", [&] {
    Rng rng(23);
    const int m = 3;
    const double c = 7.0;
    const UnitVector mu_p = random_unit(m, rng);
    const UnitVector mu_z = random_unit(m, rng);
    const double kz = 9.0;
    const EmbeddingDecomposition sample(kz * mu_z.coords());
    const NivmfParams ni(mu_p, Vector::Constant(m, c));
    const double el_mc = d_el_nivmf(ni, sample, 200000, 7, exact);
    const double el_closed = d_el_vmf(VmfParams(mu_p, c), sample, exact) -
                             (m - 1.0) * std::log(c);
    const double err = std::abs(el_mc - el_closed) / std::abs(el_closed);
    return std::pair{err < 0.02, "rel gap " + fmt(err)};
  });

  s.run("metrics", "norm awareness at fixed 60 degree angle", [&] {
    const int m = 3;
    Vector e1 = Vector::Zero(m);
    e1(0) = 1.0;
    const UnitVector mu_p{e1};
    Vector dir(m);
    dir << 0.5, std::sqrt(3.0) / 2.0, 0.0;  // 60 degrees from e1
    // Proxy norm below 2 so the law-of-cosines parabola has its minimum
    // left of kappa_z = 1; both norm-aware metrics are then strictly
    // increasing on [1, 50] while the cosine stays flat.
    const VmfParams proxy(mu_p, 1.5);
    const VmfParams proxy_90(mu_p, 10.0);
    Vector dir_90(m);
    dir_90 << 0.0, 1.0, 0.0;
    double prev_l2 = -1e300;
    double prev_b = -1e300;
    double prev_b90 = -1e300;
    double cos_ref = 0.0;
    bool ok = true;
    for (int i = 0; i <= 20; ++i) {
      const double kz = 1.0 + (50.0 - 1.0) * i / 20.0;
      const EmbeddingDecomposition sample(kz * dir);
      const double dc = d_cos(mu_p, sample);
      const double dl = d_l2(proxy, sample);
      const double db = d_b_vmf(proxy, sample, exact);
      const double db90 = d_b_vmf(
          proxy_90, EmbeddingDecomposition(kz * dir_90), exact);
      if (i == 0) {
        cos_ref = dc;
      } else if (std::abs(dc - cos_ref) > 1e-12) {
        ok = false;
      }
      if (dl <= prev_l2 || db <= prev_b || db90 <= prev_b90) ok = false;
      prev_l2 = dl;
      prev_b = db;
      prev_b90 = db90;
    }
    return std::pair{ok, std::string("cos constant, l2 and b strictly rising")};
  });

  s.run("metrics", "joint rotation invariance of all metrics", [&] {
    Rng rng(24);
    const int m = 4;
    const Matrix q = random_rotation(m, rng);
    const UnitVector mu_p = random_unit(m, rng);
    const UnitVector mu_z = random_unit(m, rng);
    const double kp = 8.0;
    const double kz = 3.0;
    Vector kdiag(m);
    for (int i = 0; i < m; ++i) kdiag(i) = rng.uniform(2.0, 20.0);

    const EmbeddingDecomposition sample(kz * mu_z.coords());
    const EmbeddingDecomposition sample_r(q * (kz * mu_z.coords()));
    const UnitVector mu_p_r = UnitVector::normalized(q * mu_p.coords());
    const VmfParams proxy(mu_p, kp);
    const VmfParams proxy_r(mu_p_r, kp);
    const NormalizerBackend exact_b = NormalizerBackend::exact();

    double worst = 0.0;
    worst = std::max(worst, std::abs(d_cos(mu_p, sample) - d_cos(mu_p_r, sample_r)));
    worst = std::max(worst, std::abs(d_l2(proxy, sample) - d_l2(proxy_r, sample_r)));
    worst = std::max(worst, std::abs(d_el_vmf(proxy, sample, exact_b) -
                                     d_el_vmf(proxy_r, sample_r, exact_b)));
    worst = std::max(worst, std::abs(d_b_vmf(proxy, sample, exact_b) -
                                     d_b_vmf(proxy_r, sample_r, exact_b)));
    worst = std::max(worst, std::abs(d_kl_vmf(proxy, sample, exact_b) -
                                     d_kl_vmf(proxy_r, sample_r, exact_b)));
    // The nivMF metrics are equivariant only when K rotates with the frame;
    // the diagonal-K family is axis-aligned by construction, so rotate all
    // of (mu, x) while K stays fixed is NOT asserted. Instead assert the
    // vMF-structured invariances above hold to round-off.
    return std::pair{worst < 1e-9, "max |shift| " + fmt(worst)};
  });
}

void losses_suite(Suite& s) {
  const NormalizerBackend exact = NormalizerBackend::exact();

  s.run("losses", "softmax shift invariance / 1-over-N equivalence", [&] {
    Rng rng(31);
    Vector d(5);
    for (int i = 0; i < 5; ++i) d(i) = rng.uniform(0.0, 10.0);
    double worst = 0.0;
    for (double shift : {std::log(5.0), 3.7, -2.0}) {
      worst = std::max(worst, std::abs(nca_softmax_loss(d, 2, 0.7) -
                                       nca_softmax_loss(d.array() + shift, 2,
                                                        0.7)));
    }
    return std::pair{worst < 1e-10, "max |shift effect| " + fmt(worst)};
  });

  s.run("losses", "cosine-metric loss equals plain NCA on directions", [&] {
    Rng rng(32);
    const int m = 6, c_count = 4;
    ProxyBank bank =
        ProxyBank::random_init(c_count, m, ConcentrationKind::kScalar, 5.0, rng);
    Vector z(m);
    for (int i = 0; i < m; ++i) z(i) = rng.gaussian();
    const EmbeddingDecomposition sample(z);
    LossConfig cfg;
    cfg.temperature = 0.25;
    cfg.metric.tag = MetricTag::kCos;
    const double a = prob_nca_loss(bank, sample, 1, cfg, exact, 0);
    Vector d(c_count);
    for (int c = 0; c < c_count; ++c) d(c) = d_cos(bank.direction(c), sample);
    const double b = nca_softmax_loss(d, 1, 0.25);
    return std::pair{std::abs(a - b) < 1e-12, "gap " + fmt(std::abs(a - b))};
  });

  s.run("losses", "cosine metric: zero gradient through the sample norm", [&] {
    Rng rng(33);
    const int m = 5, c_count = 3;
    ProxyBank bank =
        ProxyBank::random_init(c_count, m, ConcentrationKind::kScalar, 5.0, rng);
    Vector z(m);
    for (int i = 0; i < m; ++i) z(i) = rng.gaussian();
    LossConfig cfg;
    cfg.metric.tag = MetricTag::kCos;
    const auto g = loss_gradients(bank, z, 0, cfg, exact, 0);
    return std::pair{g.d_sample_kappa == 0.0,
                     "d loss / d kappa_z = " + fmt(g.d_sample_kappa)};
  });

  s.run("losses", "squared-metric gradient is linear in the sample norm", [&] {
    Vector d(4);
    d << 1.0, 2.5, 0.3, 4.0;
    const double g1 = analytic_grad_l2_given_distances(d, 3.0, 2.0, 1, 0.5, 2);
    const double g2 = analytic_grad_l2_given_distances(d, 3.0, 4.0, 1, 0.5, 2);
    const double ratio = g2 / g1;
    return std::pair{std::abs(ratio - 2.0) < 1e-9, "ratio " + fmt(ratio)};
  });

  s.run("losses", "temperature limit keyed by the argmin distance", [&] {
    Vector d(3);
    d << 2.0, 1.0, 5.0;
    const double at_argmin = nca_softmax_loss(d, 1, 1e-6);
    const double off_argmin = nca_softmax_loss(d, 0, 1e-6);
    return std::pair{at_argmin < 1e-3 && off_argmin > 1e3,
                     "argmin " + fmt(at_argmin) + ", other " + fmt(off_argmin)};
  });

  s.run("losses", "reverse-mode gradients match finite differences", [&] {
    Rng rng(34);
    const int m = 4, c_count = 3;
    double worst = 0.0;
    for (MetricTag tag : {MetricTag::kCos, MetricTag::kL2, MetricTag::kElVmf,
                          MetricTag::kBVmf, MetricTag::kKlVmf,
                          MetricTag::kNivmfPoint}) {
      LossConfig cfg;
      cfg.metric.tag = tag;
      cfg.temperature = 1.3;
      const ConcentrationKind kind = cfg.metric.needs_diag_concentration()
                                         ? ConcentrationKind::kPerDimension
                                         : ConcentrationKind::kScalar;
      ProxyBank bank = ProxyBank::random_init(c_count, m, kind, 6.0, rng);
      Vector z(m);
      for (int i = 0; i < m; ++i) z(i) = 2.0 * rng.gaussian();
      const auto g = loss_gradients(bank, z, 1, cfg, exact, 0);
      // FD on one direction coordinate and one concentration coordinate.
      const double h = 1e-5;
      auto loss_at = [&](const ProxyBank& b2, const Vector& z2) {
        return prob_nca_loss(b2, EmbeddingDecomposition(z2), 1, cfg, exact, 0);
      };
      {
        ProxyBank hi = bank, lo = bank;
        hi.direction_storage()(0, 1) += h;
        lo.direction_storage()(0, 1) -= h;
        const double fd = (loss_at(hi, z) - loss_at(lo, z)) / (2 * h);
        if (std::abs(fd) > 1e-6) {
          worst = std::max(worst,
                           std::abs(fd - g.d_direction(0, 1)) / std::abs(fd));
        }
      }
      {
        ProxyBank hi = bank, lo = bank;
        hi.concentration_storage()(2, 0) += h;
        lo.concentration_storage()(2, 0) -= h;
        const double fd = (loss_at(hi, z) - loss_at(lo, z)) / (2 * h);
        if (std::abs(fd) > 1e-6) {
          worst = std::max(worst,
                           std::abs(fd - g.d_concentration(2, 0)) / std::abs(fd));
        }
      }
      {
        Vector hi = z, lo = z;
        hi(2) += h;
        lo(2) -= h;
        const double fd = (loss_at(bank, hi) - loss_at(bank, lo)) / (2 * h);
        if (std::abs(fd) > 1e-6) {
          worst = std::max(worst, std::abs(fd - g.d_raw(2)) / std::abs(fd));
        }
      }
    }
    return std::pair{worst < 1e-4, "max rel err " + fmt(worst)};
  });
}

void synthdata_suite(Suite& s) {
  s.run("synthdata", "empirical class means align with true directions", [] {
    SyntheticConfig cfg;
    cfg.dims = 8;
    cfg.classes = 4;
    cfg.samples_per_class = 2000;
    cfg.feature_dim = 8;
    cfg.kappa_min = 10.0;
    cfg.kappa_max = 10.0;  // isotropic kappa = 10
    cfg.seed = 5;
    const auto spec = SyntheticSpec::materialize(cfg);
    const auto data = generate(spec);
    double worst = 1.0;
    for (int c = 0; c < cfg.classes; ++c) {
      Vector mean = Vector::Zero(cfg.dims);
      int n = 0;
      for (Index i = 0; i < data.train.size(); ++i) {
        if (data.train.labels[i] == c) {
          mean += data.train.features.row(i).transpose();
          ++n;
        }
      }
      for (Index i = 0; i < data.test.size(); ++i) {
        if (data.test.labels[i] == c) {
          mean += data.test.features.row(i).transpose();
          ++n;
        }
      }
      mean /= n;
      worst = std::min(worst, cosine_similarity(mean, Vector(spec.mu.row(c).transpose())));
    }
    return std::pair{worst >= 0.99, "min cosine " + fmt(worst)};
  });

  s.run("synthdata", "ambiguous subset is more dispersed than clean", [] {
    SyntheticConfig cfg;
    cfg.dims = 8;
    cfg.classes = 4;
    cfg.samples_per_class = 1000;
    cfg.feature_dim = 8;
    cfg.kappa_min = 8.0;
    cfg.kappa_max = 40.0;
    cfg.ambiguity_fraction = 0.3;
    cfg.ambiguity_multiplier = 0.2;
    cfg.seed = 6;
    const auto data = generate(cfg);
    for (int c = 0; c < cfg.classes; ++c) {
      Vector clean = Vector::Zero(cfg.dims), amb = Vector::Zero(cfg.dims);
      int n_clean = 0, n_amb = 0;
      auto absorb = [&](const LabeledDataset& d) {
        for (Index i = 0; i < d.size(); ++i) {
          if (d.labels[i] != c) continue;
          if (d.ambiguous[i]) {
            amb += d.features.row(i).transpose();
            ++n_amb;
          } else {
            clean += d.features.row(i).transpose();
            ++n_clean;
          }
        }
      };
      absorb(data.train);
      absorb(data.test);
      const double r_clean = (clean / n_clean).norm();
      const double r_amb = (amb / n_amb).norm();
      if (!(r_amb < r_clean)) {
        return std::pair{false, "class " + std::to_string(c) + ": clean " +
                                    fmt(r_clean) + " vs ambiguous " + fmt(r_amb)};
      }
    }
    return std::pair{true, std::string{}};
  });

  s.run("synthdata", "generation is bitwise deterministic per seed", [] {
    SyntheticConfig cfg;
    cfg.dims = 6;
    cfg.classes = 3;
    cfg.samples_per_class = 40;
    cfg.feature_dim = 10;
    cfg.seed = 7;
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    const bool same = a.train.features == b.train.features &&
                      a.test.features == b.test.features &&
                      a.train.labels == b.train.labels;
    return std::pair{same, std::string{}};
  });
}

void trainer_suite(Suite& s) {
  const auto tiny_data = [] {
    SyntheticConfig cfg;
    cfg.dims = 4;
    cfg.classes = 2;
    cfg.samples_per_class = 30;
    cfg.feature_dim = 4;
    cfg.kappa_min = 15.0;
    cfg.kappa_max = 30.0;
    cfg.seed = 8;
    return generate(cfg);
  };

  s.run("trainer", "lr = 0 leaves parameters and loss unchanged", [&] {
    const auto data = tiny_data();
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.lr = 0.0;
    cfg.seed = 1;
    cfg.loss.metric.tag = MetricTag::kCos;
    cfg.loss.temperature = 0.125;
    cfg.loss.metric.normalizer = NormalizerKind::kExact;
    const auto r = train(data.train, data.test, cfg);
    double span = 0.0;
    for (const auto& e : r.epochs) span = std::max(span, std::abs(e.loss - r.epochs[0].loss));
    return std::pair{span < 1e-12, "loss span " + fmt(span)};
  });

  s.run("trainer", "single full-batch step at small lr does not increase loss",
        [&] {
    const auto data = tiny_data();
    for (MetricTag tag :
         {MetricTag::kCos, MetricTag::kL2, MetricTag::kNivmfPoint,
          MetricTag::kElVmf, MetricTag::kBVmf, MetricTag::kKlVmf,
          MetricTag::kElNivmf}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TrainConfig cfg;
        cfg.lr = 1e-3;
        cfg.weight_decay = 0.0;
        cfg.batch_size = static_cast<int>(data.train.size());
        cfg.seed = seed;
        cfg.loss.metric.tag = tag;
        cfg.loss.metric.normalizer = NormalizerKind::kExact;
        cfg.loss.temperature = tag == MetricTag::kCos ? 0.125 : 4.0;
        cfg.loss.mc_samples = 5;

        // Full-batch loss under the exact seeded surface the single step
        // optimizes (epoch 0 per-sample seeds), before and after the step.
        const auto seeded_loss = [&](const TrainState& st) {
          double total = 0.0;
          for (Index i = 0; i < data.train.size(); ++i) {
            const EmbeddingDecomposition sample(
                Vector(data.train.features.row(i).transpose()));
            total += prob_nca_loss(st.bank, sample, data.train.labels[i],
                                   cfg.loss, NormalizerBackend::exact(),
                                   train_sample_seed(cfg.seed, 0, i));
          }
          return total / static_cast<double>(data.train.size());
        };
        cfg.epochs = 0;
        const auto before = train(data.train, data.test, cfg);
        cfg.epochs = 1;
        const auto after = train(data.train, data.test, cfg);
        const double l0 = seeded_loss(before.state);
        const double l1 = seeded_loss(after.state);
        if (l1 > l0 + 1e-9) {
          return std::pair{false, "loss rose for " + to_string(tag) +
                                      " seed " + std::to_string(seed) + ": " +
                                      fmt(l0) + " -> " + fmt(l1)};
        }
      }
    }
    return std::pair{true, std::string{}};
  });

  s.run("trainer", "constraints hold after every optimizer step", [&] {
    const auto data = tiny_data();
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.lr = 5e-2;
    cfg.seed = 3;
    cfg.loss.metric.tag = MetricTag::kNivmfPoint;
    cfg.loss.metric.normalizer = NormalizerKind::kApprox;
    cfg.loss.temperature = 4.0;
    const auto r = train(data.train, data.test, cfg);
    for (int c = 0; c < r.state.bank.count(); ++c) {
      if (std::abs(r.state.bank.direction(c).coords().norm() - 1.0) > 1e-9) {
        return std::pair{false, std::string("direction not unit")};
      }
      if (!(r.state.bank.kappa_diag(c).minCoeff() > 0.0)) {
        return std::pair{false, std::string("non-positive kappa")};
      }
    }
    return std::pair{true, std::string{}};
  });

  s.run("trainer", "training is bitwise deterministic per seed", [&] {
    const auto data = tiny_data();
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 4;
    cfg.loss.metric.tag = MetricTag::kElNivmf;
    cfg.loss.metric.normalizer = NormalizerKind::kApprox;
    cfg.loss.temperature = 4.0;
    const auto a = train(data.train, data.test, cfg);
    const auto b = train(data.train, data.test, cfg);
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
      if (a.epochs[i].loss != b.epochs[i].loss ||
          a.epochs[i].recall1 != b.epochs[i].recall1) {
        return std::pair{false, "epoch " + std::to_string(i) + " differs"};
      }
    }
    const bool same_state =
        a.state.bank.direction_storage() == b.state.bank.direction_storage() &&
        a.state.bank.concentration_storage() ==
            b.state.bank.concentration_storage();
    return std::pair{same_state, std::string{}};
  });
}

void evaluation_suite(Suite& s) {
  s.run("evaluation", "duplicated points give recall@1 of 1", [] {
    Matrix e(6, 3);
    e << 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1;
    const std::vector<int> labels{0, 0, 1, 1, 2, 2};
    const double r = recall_at_k(e, labels, 1, RetrievalMetric::kCosine);
    return std::pair{r == 1.0, "recall " + fmt(r)};
  });

  s.run("evaluation", "cosine reports invariant to per-sample rescaling", [] {
    Rng rng(41);
    Matrix e(20, 4);
    std::vector<int> labels(20);
    for (int i = 0; i < 20; ++i) {
      labels[i] = i % 4;
      for (int j = 0; j < 4; ++j) e(i, j) = rng.gaussian() + (labels[i] == j);
    }
    Matrix scaled = e;
    for (int i = 0; i < 20; ++i) scaled.row(i) *= rng.uniform(0.5, 10.0);
    const double a = recall_at_k(e, labels, 3, RetrievalMetric::kCosine);
    const double b = recall_at_k(scaled, labels, 3, RetrievalMetric::kCosine);
    const double c = recall_at_k(e, labels, 3, RetrievalMetric::kEuclidean);
    const double d = recall_at_k(scaled, labels, 3, RetrievalMetric::kEuclidean);
    const bool euclid_moved = std::abs(c - d) > 0.0;
    return std::pair{a == b && euclid_moved,
                     "cosine " + fmt(a) + "==" + fmt(b) + ", euclidean " +
                         fmt(c) + "->" + fmt(d)};
  });

  s.run("evaluation", "recall at n-1 is 1 when classes have two members", [] {
    Rng rng(42);
    Matrix e(12, 3);
    std::vector<int> labels(12);
    for (int i = 0; i < 12; ++i) {
      labels[i] = i / 2;
      for (int j = 0; j < 3; ++j) e(i, j) = rng.gaussian();
    }
    const double r = recall_at_k(e, labels, 11, RetrievalMetric::kCosine);
    return std::pair{r == 1.0, "recall " + fmt(r)};
  });

  s.run("evaluation", "mAP extremes: perfect 1, inverted 0", [] {
    // Two classes along one axis: perfect ordering by construction.
    Matrix good(4, 2);
    good << 1, 0, 0.9, 0.1, -1, 0, -0.9, -0.1;
    const std::vector<int> labels{0, 0, 1, 1};
    const double perfect = map_at_r(good, labels, 10, RetrievalMetric::kCosine);
    const std::vector<int> swapped{0, 1, 0, 1};
    const double worst = map_at_r(good, swapped, 1, RetrievalMetric::kCosine);
    return std::pair{perfect == 1.0 && worst == 0.0,
                     "perfect " + fmt(perfect) + ", inverted " + fmt(worst)};
  });
}

}  // namespace

std::vector<CheckResult> run_validation_suite() {
  std::vector<CheckResult> results;
  Suite s(results);
  specfn_suite(s);
  directional_suite(s);
  metrics_suite(s);
  losses_suite(s);
  synthdata_suite(s);
  trainer_suite(s);
  evaluation_suite(s);
  return results;
}

}  // namespace pdml
