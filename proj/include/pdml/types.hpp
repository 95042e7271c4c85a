#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "pdml/errors.hpp"

namespace pdml {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Tolerance on |norm - 1| accepted by UnitVector.
inline constexpr double kUnitNormTol = 1e-6;
// Embedding norms below this are treated as degenerate (direction ambiguous).
inline constexpr double kDegenerateNormEps = 1e-8;

// Cosine similarity of two nonzero vectors, clamped to [-1, 1] so that
// downstream acos/exp consumers never see 1 + 1e-16 artifacts.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                         const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatchError("cosine_similarity: sizes " +
                                 std::to_string(a.size()) + " vs " +
                                 std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw DomainError("cosine_similarity: zero-norm input");
  }
  const double s = a.dot(b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

// A point on S^{M-1}; construction checks the norm invariant.
class UnitVector {
 public:
  explicit UnitVector(Vector coords) : coords_(std::move(coords)) {
    if (coords_.size() < 2) {
      throw DomainError("UnitVector: dimension must be >= 2");
    }
    if (std::abs(coords_.norm() - 1.0) > kUnitNormTol) {
      throw DomainError("UnitVector: norm " + std::to_string(coords_.norm()) +
                        " is not within 1e-6 of 1");
    }
  }

  // Normalizes an arbitrary nonzero vector onto the sphere.
  static UnitVector normalized(const Vector& v) {
    const double n = v.norm();
    if (n < kDegenerateNormEps) {
      throw DegenerateEmbeddingError(
          "UnitVector::normalized: norm below 1e-8, direction undefined");
    }
    return UnitVector(Vector(v / n));
  }

  const Vector& coords() const { return coords_; }
  Index dim() const { return coords_.size(); }

 private:
  Vector coords_;
};

// vMF parameters: mean direction and scalar concentration.
struct VmfParams {
  UnitVector mu;
  double kappa = 0.0;

  VmfParams(UnitVector mu_, double kappa_) : mu(std::move(mu_)), kappa(kappa_) {
    if (!(kappa >= 0.0)) {
      throw DomainError("VmfParams: kappa must be >= 0");
    }
  }
  Index dim() const { return mu.dim(); }
};

// Non-isotropic vMF parameters: mean direction and per-dimension positive
// concentrations (the diagonal of K).
struct NivmfParams {
  UnitVector mu;
  Vector kappa_diag;

  NivmfParams(UnitVector mu_, Vector kappa_diag_)
      : mu(std::move(mu_)), kappa_diag(std::move(kappa_diag_)) {
    if (kappa_diag.size() != mu.dim()) {
      throw DimensionMismatchError("NivmfParams: kappa_diag size mismatch");
    }
    if (!(kappa_diag.minCoeff() > 0.0)) {
      throw DomainError("NivmfParams: every concentration must be > 0");
    }
  }
  Index dim() const { return mu.dim(); }
};

// Duality view of a raw embedding z: direction mu = z/|z| and
// concentration kappa = |z|, so that raw = kappa * mu.
struct EmbeddingDecomposition {
  Vector raw;
  UnitVector mu;
  double kappa;

  explicit EmbeddingDecomposition(Vector z)
      : raw(std::move(z)), mu(make_mu(raw)), kappa(raw.norm()) {}

  Index dim() const { return raw.size(); }
  // Natural parameter nu = kappa * mu = raw.
  const Vector& natural() const { return raw; }

 private:
  static UnitVector make_mu(const Vector& z) {
    const double n = z.norm();
    if (n < kDegenerateNormEps) {
      throw DegenerateEmbeddingError(
          "decompose: embedding norm below 1e-8, direction undefined");
    }
    return UnitVector(Vector(z / n));
  }
};

inline EmbeddingDecomposition decompose(Vector z) {
  return EmbeddingDecomposition(std::move(z));
}

}  // namespace pdml
