#pragma once

#include <stdexcept>
#include <string>

namespace pdml {

// Invalid mathematical input (negative norm, kappa <= 0, bad order, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Embedding norm below the representable threshold; direction is ambiguous.
class DegenerateEmbeddingError : public DomainError {
 public:
  explicit DegenerateEmbeddingError(const std::string& what) : DomainError(what) {}
};

class DimensionMismatchError : public std::invalid_argument {
 public:
  explicit DimensionMismatchError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Least-squares fit could not be computed or failed its quality gate.
class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

// A gradient path that is intentionally not provided (e.g. through a
// rejection sampler) was requested.
class UnsupportedGradientError : public std::runtime_error {
 public:
  explicit UnsupportedGradientError(const std::string& what)
      : std::runtime_error(what) {}
};

// Non-finite values or divergent state encountered at runtime.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pdml
