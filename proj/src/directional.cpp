#include "pdml/directional.hpp"

#include <cmath>
#include <string>

namespace pdml {

namespace {

void check_same_dim(Index a, Index b, const char* where) {
  if (a != b) {
    throw DimensionMismatchError(std::string(where) + ": dims " +
                                 std::to_string(a) + " vs " +
                                 std::to_string(b));
  }
}

// Gamma(alpha, 1) variate, Marsaglia-Tsang squeeze; alpha < 1 is boosted
// through G_alpha = G_{alpha+1} * U^{1/alpha}.
double sample_gamma(double alpha, Rng& rng) {
  if (alpha < 1.0) {
    const double u = rng.uniform01_open_left();
    return sample_gamma(alpha + 1.0, rng) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform01_open_left();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_beta(double a, double b, Rng& rng) {
  const double x = sample_gamma(a, rng);
  const double y = sample_gamma(b, rng);
  return x / (x + y);
}

// Rejection sampler for the polar cosine of a vMF in dimension M.
double sample_polar_cosine_rejection(int dim, double kappa, Rng& rng) {
  const double m1 = static_cast<double>(dim - 1);
  const double b =
      (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m1 * m1)) / m1;
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m1 * std::log(1.0 - x0 * x0);
  for (;;) {
    const double z = sample_beta(0.5 * m1, 0.5 * m1, rng);
    const double u = rng.uniform01_open_left();
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    if (kappa * w + m1 * std::log(1.0 - x0 * w) - c >= std::log(u)) {
      return w;
    }
  }
}

Vector sample_unit_gaussian_direction(int dim, Rng& rng) {
  Vector v(dim);
  double norm2;
  do {
    for (int i = 0; i < dim; ++i) v(i) = rng.gaussian();
    norm2 = v.squaredNorm();
  } while (norm2 < 1e-24);
  return v / std::sqrt(norm2);
}

}  // namespace

double vmf_log_density(const VmfParams& p, const UnitVector& x,
                       const NormalizerBackend& backend) {
  check_same_dim(p.dim(), x.dim(), "vmf_log_density");
  const int dim = static_cast<int>(p.dim());
  if (p.kappa == 0.0) {
    return backend.log_c(dim, 0.0);  // uniform, independent of x
  }
  const double s = cosine_similarity(x.coords(), p.mu.coords());
  return backend.log_c(dim, p.kappa) + p.kappa * s;
}

double nivmf_log_density(const NivmfParams& p, const UnitVector& x,
                         const NormalizerBackend& backend) {
  check_same_dim(p.dim(), x.dim(), "nivmf_log_density");
  const int dim = static_cast<int>(p.dim());
  const Vector k_mu = p.kappa_diag.cwiseProduct(p.mu.coords());
  const Vector k_x = p.kappa_diag.cwiseProduct(x.coords());
  const double kappa_tilde = k_mu.norm();
  const double log_d = p.kappa_diag.array().log().sum() - std::log(kappa_tilde);
  const double s = cosine_similarity(k_x, k_mu);
  return backend.log_c(dim, kappa_tilde) + log_d + kappa_tilde * s;
}

double vmf_polar_cosine_from_uniform(double kappa, double u) {
  if (kappa < 1e-8) return 2.0 * u - 1.0;  // uniform limit
  return 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
}

std::vector<PoleSample> sample_vmf_pole(int dim, double kappa, int n,
                                        std::uint64_t seed) {
  if (dim < 2) throw DomainError("sample_vmf_pole: dim must be >= 2");
  if (!(kappa >= 0.0)) throw DomainError("sample_vmf_pole: kappa must be >= 0");
  if (!std::isfinite(kappa)) {
    throw NumericalError("sample_vmf_pole: non-finite kappa");
  }
  if (n < 1) throw DomainError("sample_vmf_pole: n must be >= 1");
  Rng rng(seed);
  std::vector<PoleSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    PoleSample s;
    if (dim == 3) {
      s.u = rng.uniform01_open_left();
      s.w = vmf_polar_cosine_from_uniform(kappa, s.u);
      const double phi = 2.0 * M_PI * rng.uniform01();
      s.tangent = Vector(2);
      s.tangent << std::cos(phi), std::sin(phi);
    } else {
      s.w = sample_polar_cosine_rejection(dim, kappa, rng);
      s.tangent = sample_unit_gaussian_direction(dim - 1, rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Vector rotate_pole_sample(const UnitVector& mu, const PoleSample& s) {
  const Index m = mu.dim();
  if (s.tangent.size() != m - 1) {
    throw DimensionMismatchError("rotate_pole_sample: tangent size mismatch");
  }
  Vector x(m);
  const double r = std::sqrt(std::max(0.0, 1.0 - s.w * s.w));
  x(0) = s.w;
  x.tail(m - 1) = r * s.tangent;

  // Householder H reflecting through the bisector of (mu, pole) with
  // pole = -sign(mu_1) e_1; the far pole keeps |mu - pole| >= sqrt(2).
  // H maps pole -> mu, and x -> H(-sign * x) has the pole-frame geometry
  // carried onto mu.
  const double sign = mu.coords()(0) >= 0.0 ? 1.0 : -1.0;
  Vector v = mu.coords();
  v(0) += sign;  // mu - pole
  v /= v.norm();
  const Vector reflected = x - 2.0 * v.dot(x) * v;
  return -sign * reflected;
}

std::vector<UnitVector> sample_vmf(const VmfParams& p, int n,
                                   std::uint64_t seed) {
  const int dim = static_cast<int>(p.dim());
  const auto pole = sample_vmf_pole(dim, p.kappa, n, seed);
  std::vector<UnitVector> out;
  out.reserve(n);
  for (const auto& s : pole) {
    Vector x = rotate_pole_sample(p.mu, s);
    out.push_back(UnitVector::normalized(x));
  }
  return out;
}

std::vector<UnitVector> sample_nivmf_approx(const NivmfParams& p, int n,
                                            std::uint64_t seed) {
  const Vector k_mu = p.kappa_diag.cwiseProduct(p.mu.coords());
  const double kappa_tilde = k_mu.norm();
  const VmfParams transformed(UnitVector::normalized(k_mu), kappa_tilde);
  const auto draws = sample_vmf(transformed, n, seed);
  std::vector<UnitVector> out;
  out.reserve(n);
  for (const auto& x : draws) {
    const Vector y = x.coords().cwiseQuotient(p.kappa_diag);
    out.push_back(UnitVector::normalized(y));
  }
  return out;
}

double empirical_resultant_length(const std::vector<UnitVector>& samples) {
  if (samples.empty()) throw DomainError("empirical_resultant_length: empty");
  Vector mean = Vector::Zero(samples.front().dim());
  for (const auto& s : samples) mean += s.coords();
  mean /= static_cast<double>(samples.size());
  return mean.norm();
}

}  // namespace pdml
