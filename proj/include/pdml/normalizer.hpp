#pragma once

#include <memory>
#include <string>

#include "pdml/errors.hpp"
#include "pdml/specfn.hpp"

namespace pdml {

enum class NormalizerKind { kExact, kApprox };

inline const char* to_string(NormalizerKind k) {
  return k == NormalizerKind::kExact ? "exact" : "approx";
}

// Backend for log C_M(kappa) and its kappa-derivative. The exact backend
// evaluates Bessel functions; the approx backend evaluates a quadratic fit
// (cheap and analytically differentiable, intended for training loops).
class NormalizerBackend {
 public:
  static NormalizerBackend exact() { return NormalizerBackend(); }

  static NormalizerBackend approx(QuadraticNormalizerFit fit) {
    NormalizerBackend b;
    b.kind_ = NormalizerKind::kApprox;
    b.fit_ = std::make_shared<QuadraticNormalizerFit>(fit);
    return b;
  }

  // Fits the default grid (41 points on [1, 120]) for the given dimension.
  static NormalizerBackend approx_default(int dim) {
    std::vector<double> grid(41);
    for (int i = 0; i < 41; ++i) grid[i] = 1.0 + (120.0 - 1.0) * i / 40.0;
    return approx(fit_log_c_quadratic(dim, grid));
  }

  NormalizerKind kind() const { return kind_; }
  const QuadraticNormalizerFit* fit() const { return fit_.get(); }

  double log_c(int dim, double kappa) const {
    if (kind_ == NormalizerKind::kExact) return log_c_exact(dim, kappa);
    require_dim(dim);
    return (*fit_)(kappa);
  }

  // d/dkappa log C_M(kappa); equals -A_M(kappa) for the exact backend.
  double dlog_c(int dim, double kappa) const {
    if (kind_ == NormalizerKind::kExact) {
      return -mean_resultant_length(dim, kappa);
    }
    require_dim(dim);
    return fit_->derivative(kappa);
  }

 private:
  NormalizerBackend() = default;

  void require_dim(int dim) const {
    if (fit_->dim != dim) {
      throw DimensionMismatchError("NormalizerBackend: fit is for dim " +
                                   std::to_string(fit_->dim) +
                                   ", requested dim " + std::to_string(dim));
    }
  }

  NormalizerKind kind_ = NormalizerKind::kExact;
  std::shared_ptr<QuadraticNormalizerFit> fit_;
};

}  // namespace pdml
