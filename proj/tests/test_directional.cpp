#include <doctest.h>

#include <cmath>

#include <pdml/directional.hpp>
#include <pdml/sphere_quadrature.hpp>

#include "support/oracles.hpp"

using namespace pdml;

namespace {

UnitVector unit3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return UnitVector::normalized(v);
}

UnitVector random_unit(int dim, Rng& rng) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.gaussian();
  return UnitVector::normalized(v);
}

// ML concentration of an isotropic vMF on S^2 from the mean resultant
// length: solve A_3(kappa) = rbar by bisection.
double fit_isotropic_kappa3(double rbar) {
  double lo = 1e-6, hi = 1e4;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double a = 1.0 / std::tanh(mid) - 1.0 / mid;
    (a < rbar ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  Vector e1 = Vector::Zero(3), e2 = Vector::Zero(3);
  e1(0) = 1.0;
  e2(1) = 1.0;
  CHECK(cosine_similarity(e1, e1) == 1.0);
  CHECK(cosine_similarity(e1, e2) == 0.0);
  Vector a(3), b(3);
  a << 2, 0, 0;
  b << -3, 0, 0;
  CHECK(cosine_similarity(a, b) == -1.0);
  CHECK_THROWS_AS(cosine_similarity(Vector::Zero(3), e1), DomainError);
  CHECK_THROWS_AS(cosine_similarity(e1, Vector::Zero(2)),
                  DimensionMismatchError);
  // Clamping: a nearly parallel pair can overshoot 1 by rounding; the result
  // must still be inside [-1, 1].
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const UnitVector u = random_unit(5, rng);
    const double s = cosine_similarity(u.coords(), Vector(2.0 * u.coords()));
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
  }
}

TEST_CASE("decompose duality") {
  Vector z(3);
  z << 0, 3, 4;
  const auto d = decompose(z);
  CHECK(d.kappa == doctest::Approx(5.0));
  CHECK(d.mu.coords()(1) == doctest::Approx(0.6));
  CHECK(d.mu.coords()(2) == doctest::Approx(0.8));
  CHECK((d.kappa * d.mu.coords() - d.raw).norm() < 1e-12);

  const auto u = decompose(unit3(1, 0, 0).coords());
  CHECK(u.kappa == doctest::Approx(1.0));

  Vector tiny(2);
  tiny << 1e-12, 0;
  CHECK_THROWS_AS(decompose(tiny), DegenerateEmbeddingError);
}

TEST_CASE("vMF log density against closed form and quadrature") {
  const NormalizerBackend exact = NormalizerBackend::exact();
  const UnitVector mu = unit3(1, 2, -1);

  // At the mode with kappa = 1: log C_3(1) + 1.
  CHECK(vmf_log_density(VmfParams(mu, 1.0), mu, exact) ==
        doctest::Approx(oracles::closed_form_log_c3(1.0) + 1.0).epsilon(1e-12));

  // kappa = 0: uniform, same value at any point.
  Rng rng(1);
  const double u0 =
      vmf_log_density(VmfParams(mu, 0.0), random_unit(3, rng), exact);
  const double u1 =
      vmf_log_density(VmfParams(mu, 0.0), random_unit(3, rng), exact);
  CHECK(u0 == u1);
  CHECK(u0 == doctest::Approx(-std::log(4.0 * M_PI)));

  // Quadrature-normalized density: exp(kappa s) / Z with Z integrated
  // numerically (no Bessel anywhere in the oracle).
  const double kappa = 5.0;
  const double log_z = log_integrate_sphere([&](const Vector& x) {
    return kappa * cosine_similarity(x, mu.coords());
  });
  for (int i = 0; i < 5; ++i) {
    const UnitVector x = random_unit(3, rng);
    const double expect =
        kappa * cosine_similarity(x.coords(), mu.coords()) - log_z;
    CHECK(vmf_log_density(VmfParams(mu, kappa), x, exact) ==
          doctest::Approx(expect).epsilon(1e-8));
  }
}

TEST_CASE("vMF density integrates to one") {
  const NormalizerBackend exact = NormalizerBackend::exact();
  Rng rng(2);
  for (double kappa : {0.5, 5.0, 50.0}) {
    const VmfParams p(random_unit(3, rng), kappa);
    const double log_int = log_integrate_sphere([&](const Vector& x) {
      return vmf_log_density(p, UnitVector(x), exact);
    });
    CHECK(std::exp(log_int) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("nivMF density: isotropic reduction and mode value") {
  const NormalizerBackend exact = NormalizerBackend::exact();
  Rng rng(4);
  for (int m : {3, 16, 128}) {
    const UnitVector mu = random_unit(m, rng);
    const double c = rng.uniform(0.5, 50.0);
    const NivmfParams ni(mu, Vector::Constant(m, c));
    const VmfParams iso(mu, c);
    for (int i = 0; i < 100; ++i) {
      const UnitVector x = random_unit(m, rng);
      CHECK(nivmf_log_density(ni, x, exact) -
                vmf_log_density(iso, x, exact) ==
            doctest::Approx((m - 1.0) * std::log(c)).epsilon(1e-10));
    }
  }

  // x = mu: log C(|K mu|) + log D + |K mu|.
  const UnitVector mu = unit3(0.2, -0.5, 1.0);
  Vector kdiag(3);
  kdiag << 4.0, 9.0, 2.5;
  const double kt = kdiag.cwiseProduct(mu.coords()).norm();
  const double log_d = kdiag.array().log().sum() - std::log(kt);
  CHECK(nivmf_log_density(NivmfParams(mu, kdiag), mu, exact) ==
        doctest::Approx(log_c_exact(3, kt) + log_d + kt).epsilon(1e-12));

  CHECK_THROWS_AS(NivmfParams(mu, Vector::Zero(3)), DomainError);
}

TEST_CASE("nivMF density is softer along low-concentration axes") {
  // Mode along e1; equal-angle offsets along the kappa=5 axis and the
  // kappa=50 axis. Density must be larger where concentration is lower.
  const NormalizerBackend exact = NormalizerBackend::exact();
  Vector kdiag(3);
  kdiag << 20.0, 5.0, 50.0;
  const NivmfParams p(unit3(1, 0, 0), kdiag);
  const double angle = 0.4;
  const UnitVector low_axis = unit3(std::cos(angle), std::sin(angle), 0.0);
  const UnitVector high_axis = unit3(std::cos(angle), 0.0, std::sin(angle));
  CHECK(nivmf_log_density(p, low_axis, exact) >
        nivmf_log_density(p, high_axis, exact));
}

TEST_CASE("vMF sampler hits the analytic mean resultant length") {
  Rng rng(5);
  {
    const VmfParams p(random_unit(3, rng), 0.0);
    const auto s = sample_vmf(p, 100000, 11);
    CHECK(empirical_resultant_length(s) < 0.02);
  }
  {
    const VmfParams p(random_unit(3, rng), 5.0);
    const auto s = sample_vmf(p, 100000, 12);
    const double expect = 1.0 / std::tanh(5.0) - 0.2;  // ~0.8001
    CHECK(empirical_resultant_length(s) ==
          doctest::Approx(expect).epsilon(0.01));
  }
  {
    const VmfParams p(random_unit(8, rng), 20.0);
    const auto s = sample_vmf(p, 100000, 13);
    CHECK(empirical_resultant_length(s) ==
          doctest::Approx(oracles::mpfr_mean_resultant_length(8, 20.0))
              .epsilon(0.01));
  }
}

TEST_CASE("sampler mean direction aligns with mu") {
  Rng rng(6);
  for (int m : {3, 6}) {
    const UnitVector mu = random_unit(m, rng);
    const auto s = sample_vmf(VmfParams(mu, 10.0), 20000, 17);
    Vector mean = Vector::Zero(m);
    for (const auto& x : s) mean += x.coords();
    CHECK(cosine_similarity(mean, mu.coords()) > 0.999);
  }
}

TEST_CASE("samplers are deterministic and seed-sensitive") {
  Rng rng(7);
  const VmfParams p(random_unit(5, rng), 9.0);
  const auto a = sample_vmf(p, 50, 100);
  const auto b = sample_vmf(p, 50, 100);
  const auto c = sample_vmf(p, 50, 101);
  bool identical = true;
  bool different = false;
  for (int i = 0; i < 50; ++i) {
    if (a[i].coords() != b[i].coords()) identical = false;
    if (a[i].coords() != c[i].coords()) different = true;
  }
  CHECK(identical);
  CHECK(different);
}

TEST_CASE("nivMF sampler: identity K reduces to the plain sampler") {
  Rng rng(8);
  const UnitVector mu = random_unit(4, rng);
  const NivmfParams ni(mu, Vector::Ones(4));
  const auto a = sample_nivmf_approx(ni, 100, 42);
  const auto b = sample_vmf(VmfParams(mu, 1.0), 100, 42);
  for (int i = 0; i < 100; ++i) {
    CHECK((a[i].coords() - b[i].coords()).norm() < 1e-12);
  }
}

TEST_CASE("nivMF sampler: anisotropic fit beats the best isotropic fit") {
  const NormalizerBackend exact = NormalizerBackend::exact();
  Vector kdiag(3);
  kdiag << 20.0, 5.0, 50.0;
  const UnitVector mu = unit3(0.3, -1.0, 0.7);
  const NivmfParams p(mu, kdiag);
  const auto samples = sample_nivmf_approx(p, 100000, 21);

  Vector mean = Vector::Zero(3);
  for (const auto& x : samples) mean += x.coords();
  mean /= static_cast<double>(samples.size());
  const double rbar = mean.norm();
  const VmfParams iso(UnitVector::normalized(mean), fit_isotropic_kappa3(rbar));

  double ll_nivmf = 0.0, ll_iso = 0.0;
  for (const auto& x : samples) {
    ll_nivmf += nivmf_log_density(p, x, exact);
    ll_iso += vmf_log_density(iso, x, exact);
  }
  CHECK(ll_nivmf / samples.size() > ll_iso / samples.size());
}

TEST_CASE("nivMF sampler: scaled identity matches the isotropic sampler") {
  Rng rng(9);
  const UnitVector mu = random_unit(3, rng);
  const auto a =
      sample_nivmf_approx(NivmfParams(mu, Vector::Constant(3, 7.0)), 100000, 33);
  const auto b = sample_vmf(VmfParams(mu, 7.0), 100000, 34);
  CHECK(empirical_resultant_length(a) ==
        doctest::Approx(empirical_resultant_length(b)).epsilon(0.01));
}

TEST_CASE("vMF densities are invariant under joint rotation") {
  const NormalizerBackend exact = NormalizerBackend::exact();
  Rng rng(10);
  for (int rep = 0; rep < 10; ++rep) {
    const int m = 4;
    Matrix g(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) g(i, j) = rng.gaussian();
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    const UnitVector mu = random_unit(m, rng);
    const UnitVector x = random_unit(m, rng);
    const double kappa = rng.uniform(0.1, 40.0);
    const double before = vmf_log_density(VmfParams(mu, kappa), x, exact);
    const double after =
        vmf_log_density(VmfParams(UnitVector::normalized(q * mu.coords()), kappa),
                        UnitVector::normalized(q * x.coords()), exact);
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("sphere quadrature sanity") {
  // Surface area and a polynomial moment.
  CHECK(integrate_sphere([](const Vector&) { return 1.0; }) ==
        doctest::Approx(4.0 * M_PI).epsilon(1e-12));
  CHECK(integrate_sphere([](const Vector& x) { return x(0) * x(0); }) ==
        doctest::Approx(4.0 * M_PI / 3.0).epsilon(1e-12));
  const auto gl = gauss_legendre(16);
  CHECK(gl.weights.sum() == doctest::Approx(2.0).epsilon(1e-14));
  double acc = 0.0;
  for (int i = 0; i < 16; ++i) acc += gl.weights(i) * std::pow(gl.nodes(i), 8);
  CHECK(acc == doctest::Approx(2.0 / 9.0).epsilon(1e-13));
}
