#include "pdml/sphere_quadrature.hpp"

#include <cmath>
#include <limits>

#include "pdml/errors.hpp"

namespace pdml {

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: n must be >= 1");
  GaussLegendre gl;
  gl.nodes = Vector(n);
  gl.weights = Vector(n);
  // Newton iteration on P_n from the Chebyshev-like initial guess; symmetric
  // pairs are filled together.
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      // p1 = P_n(x), p0 = P_{n-1}(x)
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    gl.nodes(i) = -x;
    gl.nodes(n - 1 - i) = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    gl.weights(i) = w;
    gl.weights(n - 1 - i) = w;
  }
  if (n == 1) {
    gl.nodes(0) = 0.0;
    gl.weights(0) = 2.0;
  }
  return gl;
}

namespace {

template <typename Accumulate>
void sphere_product_rule(int n_polar, int n_azimuth, Accumulate&& acc) {
  const GaussLegendre gl = gauss_legendre(n_polar);
  const double dphi = 2.0 * M_PI / n_azimuth;
  Vector x(3);
  for (int i = 0; i < n_polar; ++i) {
    const double w = gl.nodes(i);
    const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
    for (int j = 0; j < n_azimuth; ++j) {
      const double phi = dphi * j;
      x(0) = w;
      x(1) = r * std::cos(phi);
      x(2) = r * std::sin(phi);
      acc(x, gl.weights(i) * dphi);
    }
  }
}

}  // namespace

double integrate_sphere(const std::function<double(const Vector&)>& f,
                        int n_polar, int n_azimuth) {
  double total = 0.0;
  sphere_product_rule(n_polar, n_azimuth, [&](const Vector& x, double w) {
    total += w * f(x);
  });
  return total;
}

double log_integrate_sphere(const std::function<double(const Vector&)>& log_f,
                            int n_polar, int n_azimuth) {
  // Two passes: find the max of log_f + log(w), then accumulate shifted.
  double max_term = -std::numeric_limits<double>::infinity();
  sphere_product_rule(n_polar, n_azimuth, [&](const Vector& x, double w) {
    max_term = std::max(max_term, log_f(x) + std::log(w));
  });
  if (!std::isfinite(max_term)) return max_term;
  double total = 0.0;
  sphere_product_rule(n_polar, n_azimuth, [&](const Vector& x, double w) {
    total += std::exp(log_f(x) + std::log(w) - max_term);
  });
  return max_term + std::log(total);
}

}  // namespace pdml
