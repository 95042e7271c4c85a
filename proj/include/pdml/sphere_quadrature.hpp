#pragma once

#include <functional>

#include "pdml/types.hpp"

namespace pdml {

// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  Vector nodes;
  Vector weights;
};

GaussLegendre gauss_legendre(int n);

// Product rule on S^2: Gauss-Legendre in the polar cosine, uniform
// (trapezoidal, spectrally accurate for periodic integrands) in azimuth.
// Evaluates f at points of R^3 with |x| = 1.
double integrate_sphere(const std::function<double(const Vector&)>& f,
                        int n_polar = 384, int n_azimuth = 768);

// log of the integral of exp(log_f) over S^2; the accumulation runs through
// a log-sum-exp so sharply peaked integrands cannot overflow.
double log_integrate_sphere(const std::function<double(const Vector&)>& log_f,
                            int n_polar = 384, int n_azimuth = 768);

}  // namespace pdml
