#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pdml/types.hpp"

namespace pdml {

// Scalar knobs of the generator; materializing them (drawing directions,
// concentrations and the feature lift) yields a SyntheticSpec.
struct SyntheticConfig {
  int dims = 16;
  int classes = 8;
  int samples_per_class = 150;
  int feature_dim = 16;  // >= dims; == dims means identity lift
  double kappa_min = 3.0;
  double kappa_max = 90.0;
  double ambiguity_fraction = 0.0;   // alpha in [0, 1]
  double ambiguity_multiplier = 0.2; // m < 1, scales kappa for ambiguous draws
  std::uint64_t seed = 0;

  void validate() const;
};

// Fully materialized ground truth: class directions (orthonormal when
// classes <= dims), per-dimension concentrations (log-uniform in
// [kappa_min, kappa_max]), and the fixed linear lift.
struct SyntheticSpec {
  SyntheticConfig config;
  Matrix mu;     // classes x dims, unit rows
  Matrix kappa;  // classes x dims, positive
  Matrix lift;   // feature_dim x dims, full column rank

  static SyntheticSpec materialize(const SyntheticConfig& config);
};

struct LabeledDataset {
  Matrix features;            // n x feature_dim
  std::vector<int> labels;    // class indices
  std::vector<bool> ambiguous;  // generator's ambiguity flag, for diagnostics
  std::shared_ptr<const SyntheticSpec> spec;  // ground truth, may be null

  Index size() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
  int num_classes() const;
  void validate() const;
};

struct GeneratedData {
  LabeledDataset train;
  LabeledDataset test;
};

// Draws (1-alpha) n clean and alpha n ambiguous points per class from the
// class nivMF (ambiguous draws scale the concentrations by the multiplier),
// lifts them to feature space, and splits 50/50 class-stratified.
// Deterministic per spec seed.
GeneratedData generate(const SyntheticSpec& spec);

inline GeneratedData generate(const SyntheticConfig& config) {
  return generate(SyntheticSpec::materialize(config));
}

}  // namespace pdml
