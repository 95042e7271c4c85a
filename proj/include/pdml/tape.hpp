#pragma once

#include <span>
#include <utility>
#include <vector>

#include "pdml/normalizer.hpp"
#include "pdml/types.hpp"

namespace pdml {

// Minimal reverse-mode tape over scalars and dense vectors. The primitive
// set is exactly what the loss family composes: inner product, norm,
// normalize, coordinatewise products/exponentials, affine combinations,
// exp/log/sqrt, log-sum-exp, and the normalizer log C_M(kappa) (whose local
// derivative comes from the backend). No general tensor autodiff.
class Tape {
 public:
  struct Scalar {
    Index idx = -1;
  };
  struct Vec {
    Index idx = -1;
  };

  // Leaves. Inputs receive gradients; constants do not.
  Scalar input(double v);
  Scalar constant(double v);
  Vec vec_input(Vector v);
  Vec vec_constant(Vector v);

  // Scalar ops.
  Scalar add(Scalar a, Scalar b);
  Scalar sub(Scalar a, Scalar b);
  Scalar mul(Scalar a, Scalar b);
  Scalar div(Scalar a, Scalar b);
  Scalar neg(Scalar a);
  Scalar exp(Scalar a);
  Scalar log(Scalar a);
  Scalar sqrt(Scalar a);
  // c0 + sum_i coef_i * x_i
  Scalar affine(double c0, std::span<const std::pair<double, Scalar>> terms);
  Scalar logsumexp(std::span<const Scalar> xs);
  // log C_M(kappa) through the given backend; the backward rule uses the
  // backend's analytic derivative evaluated at the forward kappa.
  Scalar log_c(Scalar kappa, int dim, const NormalizerBackend& backend);
  // Mean resultant length A_M(kappa) = -d/dkappa log C_M(kappa). Exact
  // backend differentiates through A' = 1 - A^2 - (M-1) A / kappa; approx
  // backend through the constant -2c of the quadratic fit.
  Scalar mrl(Scalar kappa, int dim, const NormalizerBackend& backend);

  // Vector ops.
  Scalar dot(Vec a, Vec b);
  Scalar norm(Vec a);
  Scalar sum(Vec a);
  Vec normalize(Vec a);
  Vec scale(Scalar s, Vec a);
  Vec vec_add(Vec a, Vec b);
  Vec vec_sub(Vec a, Vec b);
  Vec cwise_mul(Vec a, Vec b);
  Vec cwise_exp(Vec a);
  Vec from_scalars(std::span<const Scalar> xs);

  double value(Scalar a) const { return sval_[a.idx]; }
  const Vector& value(Vec a) const { return vval_[a.idx]; }

  // Runs the reverse sweep from `seed` (adjoint 1). May be called once per
  // recorded graph.
  void backward(Scalar seed);

  double grad(Scalar a) const { return sadj_[a.idx]; }
  const Vector& grad(Vec a) const { return vadj_[a.idx]; }

  std::size_t num_ops() const { return ops_.size(); }

 private:
  enum class Op {
    kAdd, kSub, kMul, kDiv, kNeg, kExp, kLog, kSqrt,
    kAffine, kLogSumExp, kLogC, kMrl,
    kDot, kNorm, kSum,
    kNormalize, kScale, kVecAdd, kVecSub, kCwiseMul, kCwiseExp, kFromScalars,
  };
  struct Node {
    Op op;
    Index out = -1;       // index into sval_ or vval_ depending on op
    Index a = -1;
    Index b = -1;
    Index pool_off = 0;   // operand list (affine/logsumexp/from_scalars)
    Index pool_len = 0;
    double aux = 0.0;     // op-specific (e.g. d log C / d kappa)
  };

  Index new_scalar(double v);
  Index new_vector(Vector v);
  Scalar record_scalar(Op op, double value, Index a, Index b, double aux = 0.0);
  Vec record_vector(Op op, Vector value, Index a, Index b);

  std::vector<double> sval_;
  std::vector<double> sadj_;
  std::vector<Vector> vval_;
  std::vector<Vector> vadj_;
  std::vector<Node> ops_;
  std::vector<Index> pool_;
  std::vector<double> coef_pool_;
};

}  // namespace pdml
