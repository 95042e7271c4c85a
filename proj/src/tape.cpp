#include "pdml/tape.hpp"

#include <cmath>
#include <limits>

namespace pdml {

Index Tape::new_scalar(double v) {
  sval_.push_back(v);
  sadj_.push_back(0.0);
  return static_cast<Index>(sval_.size()) - 1;
}

Index Tape::new_vector(Vector v) {
  vadj_.emplace_back(Vector::Zero(v.size()));
  vval_.push_back(std::move(v));
  return static_cast<Index>(vval_.size()) - 1;
}

Tape::Scalar Tape::input(double v) { return Scalar{new_scalar(v)}; }
Tape::Scalar Tape::constant(double v) { return Scalar{new_scalar(v)}; }
Tape::Vec Tape::vec_input(Vector v) { return Vec{new_vector(std::move(v))}; }
Tape::Vec Tape::vec_constant(Vector v) { return Vec{new_vector(std::move(v))}; }

Tape::Scalar Tape::record_scalar(Op op, double value, Index a, Index b,
                                 double aux) {
  const Index out = new_scalar(value);
  ops_.push_back(Node{op, out, a, b, 0, 0, aux});
  return Scalar{out};
}

Tape::Vec Tape::record_vector(Op op, Vector value, Index a, Index b) {
  const Index out = new_vector(std::move(value));
  ops_.push_back(Node{op, out, a, b, 0, 0, 0.0});
  return Vec{out};
}

Tape::Scalar Tape::add(Scalar a, Scalar b) {
  return record_scalar(Op::kAdd, sval_[a.idx] + sval_[b.idx], a.idx, b.idx);
}
Tape::Scalar Tape::sub(Scalar a, Scalar b) {
  return record_scalar(Op::kSub, sval_[a.idx] - sval_[b.idx], a.idx, b.idx);
}
Tape::Scalar Tape::mul(Scalar a, Scalar b) {
  return record_scalar(Op::kMul, sval_[a.idx] * sval_[b.idx], a.idx, b.idx);
}
Tape::Scalar Tape::div(Scalar a, Scalar b) {
  return record_scalar(Op::kDiv, sval_[a.idx] / sval_[b.idx], a.idx, b.idx);
}
Tape::Scalar Tape::neg(Scalar a) {
  return record_scalar(Op::kNeg, -sval_[a.idx], a.idx, -1);
}
Tape::Scalar Tape::exp(Scalar a) {
  return record_scalar(Op::kExp, std::exp(sval_[a.idx]), a.idx, -1);
}
Tape::Scalar Tape::log(Scalar a) {
  return record_scalar(Op::kLog, std::log(sval_[a.idx]), a.idx, -1);
}
Tape::Scalar Tape::sqrt(Scalar a) {
  return record_scalar(Op::kSqrt, std::sqrt(sval_[a.idx]), a.idx, -1);
}

Tape::Scalar Tape::affine(double c0,
                          std::span<const std::pair<double, Scalar>> terms) {
  double v = c0;
  const Index off = static_cast<Index>(pool_.size());
  for (const auto& [coef, x] : terms) {
    v += coef * sval_[x.idx];
    pool_.push_back(x.idx);
    coef_pool_.push_back(coef);
  }
  const Index out = new_scalar(v);
  ops_.push_back(Node{Op::kAffine, out, -1, -1, off,
                      static_cast<Index>(terms.size()), 0.0});
  return Scalar{out};
}

Tape::Scalar Tape::logsumexp(std::span<const Scalar> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const Scalar& x : xs) mx = std::max(mx, sval_[x.idx]);
  double acc = 0.0;
  const Index off = static_cast<Index>(pool_.size());
  for (const Scalar& x : xs) {
    acc += std::exp(sval_[x.idx] - mx);
    pool_.push_back(x.idx);
    coef_pool_.push_back(0.0);  // pools advance in lockstep (kAffine offsets)
  }
  const Index out = new_scalar(mx + std::log(acc));
  ops_.push_back(Node{Op::kLogSumExp, out, -1, -1, off,
                      static_cast<Index>(xs.size()), 0.0});
  return Scalar{out};
}

Tape::Scalar Tape::log_c(Scalar kappa, int dim,
                         const NormalizerBackend& backend) {
  const double k = sval_[kappa.idx];
  return record_scalar(Op::kLogC, backend.log_c(dim, k), kappa.idx, -1,
                       backend.dlog_c(dim, k));
}

Tape::Scalar Tape::mrl(Scalar kappa, int dim, const NormalizerBackend& backend) {
  const double k = sval_[kappa.idx];
  const double a = -backend.dlog_c(dim, k);
  double da;
  if (backend.kind() == NormalizerKind::kExact) {
    da = 1.0 - a * a - (dim - 1.0) * a / k;
  } else {
    da = -2.0 * backend.fit()->c;
  }
  return record_scalar(Op::kMrl, a, kappa.idx, -1, da);
}

Tape::Scalar Tape::dot(Vec a, Vec b) {
  return record_scalar(Op::kDot, vval_[a.idx].dot(vval_[b.idx]), a.idx, b.idx);
}
Tape::Scalar Tape::norm(Vec a) {
  return record_scalar(Op::kNorm, vval_[a.idx].norm(), a.idx, -1);
}
Tape::Scalar Tape::sum(Vec a) {
  return record_scalar(Op::kSum, vval_[a.idx].sum(), a.idx, -1);
}

Tape::Vec Tape::normalize(Vec a) {
  return record_vector(Op::kNormalize, vval_[a.idx].normalized(), a.idx, -1);
}
Tape::Vec Tape::scale(Scalar s, Vec a) {
  return record_vector(Op::kScale, sval_[s.idx] * vval_[a.idx], s.idx, a.idx);
}
Tape::Vec Tape::vec_add(Vec a, Vec b) {
  return record_vector(Op::kVecAdd, vval_[a.idx] + vval_[b.idx], a.idx, b.idx);
}
Tape::Vec Tape::vec_sub(Vec a, Vec b) {
  return record_vector(Op::kVecSub, vval_[a.idx] - vval_[b.idx], a.idx, b.idx);
}
Tape::Vec Tape::cwise_mul(Vec a, Vec b) {
  return record_vector(Op::kCwiseMul,
                       vval_[a.idx].cwiseProduct(vval_[b.idx]), a.idx, b.idx);
}
Tape::Vec Tape::cwise_exp(Vec a) {
  return record_vector(Op::kCwiseExp, vval_[a.idx].array().exp().matrix(),
                       a.idx, -1);
}

Tape::Vec Tape::from_scalars(std::span<const Scalar> xs) {
  Vector v(static_cast<Index>(xs.size()));
  const Index off = static_cast<Index>(pool_.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    v(static_cast<Index>(i)) = sval_[xs[i].idx];
    pool_.push_back(xs[i].idx);
    coef_pool_.push_back(0.0);  // lockstep with pool_
  }
  const Index out = new_vector(std::move(v));
  ops_.push_back(Node{Op::kFromScalars, out, -1, -1, off,
                      static_cast<Index>(xs.size()), 0.0});
  return Vec{out};
}

void Tape::backward(Scalar seed) {
  sadj_[seed.idx] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    const Node& n = *it;
    switch (n.op) {
      case Op::kAdd: {
        const double g = sadj_[n.out];
        sadj_[n.a] += g;
        sadj_[n.b] += g;
        break;
      }
      case Op::kSub: {
        const double g = sadj_[n.out];
        sadj_[n.a] += g;
        sadj_[n.b] -= g;
        break;
      }
      case Op::kMul: {
        const double g = sadj_[n.out];
        sadj_[n.a] += g * sval_[n.b];
        sadj_[n.b] += g * sval_[n.a];
        break;
      }
      case Op::kDiv: {
        const double g = sadj_[n.out];
        sadj_[n.a] += g / sval_[n.b];
        sadj_[n.b] -= g * sval_[n.out] / sval_[n.b];
        break;
      }
      case Op::kNeg:
        sadj_[n.a] -= sadj_[n.out];
        break;
      case Op::kExp:
        sadj_[n.a] += sadj_[n.out] * sval_[n.out];
        break;
      case Op::kLog:
        sadj_[n.a] += sadj_[n.out] / sval_[n.a];
        break;
      case Op::kSqrt:
        sadj_[n.a] += sadj_[n.out] * 0.5 / sval_[n.out];
        break;
      case Op::kAffine: {
        const double g = sadj_[n.out];
        for (Index i = 0; i < n.pool_len; ++i) {
          sadj_[pool_[n.pool_off + i]] += g * coef_pool_[n.pool_off + i];
        }
        break;
      }
      case Op::kLogSumExp: {
        const double g = sadj_[n.out];
        const double y = sval_[n.out];
        for (Index i = 0; i < n.pool_len; ++i) {
          const Index xi = pool_[n.pool_off + i];
          sadj_[xi] += g * std::exp(sval_[xi] - y);
        }
        break;
      }
      case Op::kLogC:
      case Op::kMrl:
        sadj_[n.a] += sadj_[n.out] * n.aux;
        break;
      case Op::kDot: {
        const double g = sadj_[n.out];
        vadj_[n.a] += g * vval_[n.b];
        vadj_[n.b] += g * vval_[n.a];
        break;
      }
      case Op::kNorm: {
        const double g = sadj_[n.out];
        vadj_[n.a] += (g / sval_[n.out]) * vval_[n.a];
        break;
      }
      case Op::kSum:
        vadj_[n.a].array() += sadj_[n.out];
        break;
      case Op::kNormalize: {
        // y = v / |v|;  dL/dv = (g - (y . g) y) / |v|
        const Vector& y = vval_[n.out];
        const Vector& g = vadj_[n.out];
        const double r = vval_[n.a].norm();
        vadj_[n.a] += (g - y.dot(g) * y) / r;
        break;
      }
      case Op::kScale: {
        const Vector& g = vadj_[n.out];
        sadj_[n.a] += g.dot(vval_[n.b]);
        vadj_[n.b] += sval_[n.a] * g;
        break;
      }
      case Op::kVecAdd:
        vadj_[n.a] += vadj_[n.out];
        vadj_[n.b] += vadj_[n.out];
        break;
      case Op::kVecSub:
        vadj_[n.a] += vadj_[n.out];
        vadj_[n.b] -= vadj_[n.out];
        break;
      case Op::kCwiseMul:
        vadj_[n.a] += vadj_[n.out].cwiseProduct(vval_[n.b]);
        vadj_[n.b] += vadj_[n.out].cwiseProduct(vval_[n.a]);
        break;
      case Op::kCwiseExp:
        vadj_[n.a] += vadj_[n.out].cwiseProduct(vval_[n.out]);
        break;
      case Op::kFromScalars: {
        const Vector& g = vadj_[n.out];
        for (Index i = 0; i < n.pool_len; ++i) {
          sadj_[pool_[n.pool_off + i]] += g(i);
        }
        break;
      }
    }
  }
}

}  // namespace pdml
