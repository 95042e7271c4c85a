#include "pdml/synthdata.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "pdml/directional.hpp"
#include "pdml/rng.hpp"

namespace pdml {

void SyntheticConfig::validate() const {
  if (dims < 2) throw DomainError("SyntheticConfig: dims must be >= 2");
  if (classes < 1) throw DomainError("SyntheticConfig: classes must be >= 1");
  if (samples_per_class < 2) {
    throw DomainError("SyntheticConfig: need >= 2 samples per class");
  }
  if (feature_dim < dims) {
    throw DomainError("SyntheticConfig: feature_dim must be >= dims");
  }
  if (!(kappa_min > 0.0) || !(kappa_max >= kappa_min)) {
    throw DomainError("SyntheticConfig: need 0 < kappa_min <= kappa_max");
  }
  if (ambiguity_fraction < 0.0 || ambiguity_fraction > 1.0) {
    throw DomainError("SyntheticConfig: ambiguity_fraction outside [0, 1]");
  }
  if (ambiguity_fraction > 0.0 &&
      !(ambiguity_multiplier > 0.0 && ambiguity_multiplier < 1.0)) {
    throw DomainError("SyntheticConfig: ambiguity_multiplier must be in (0, 1)");
  }
}

SyntheticSpec SyntheticSpec::materialize(const SyntheticConfig& config) {
  config.validate();
  Rng rng(config.seed);
  SyntheticSpec spec;
  spec.config = config;

  const int m = config.dims;
  const int c_count = config.classes;

  // Class directions: orthonormal when they fit, random unit rows otherwise.
  spec.mu = Matrix(c_count, m);
  if (c_count <= m) {
    Matrix g(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) g(i, j) = rng.gaussian();
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    spec.mu = q.leftCols(c_count).transpose();
  } else {
    for (int c = 0; c < c_count; ++c) {
      Vector v(m);
      for (int j = 0; j < m; ++j) v(j) = rng.gaussian();
      spec.mu.row(c) = v.normalized().transpose();
    }
  }

  // Per-dimension concentrations, log-uniform in [kappa_min, kappa_max].
  spec.kappa = Matrix(c_count, m);
  const double lo = std::log(config.kappa_min);
  const double hi = std::log(config.kappa_max);
  for (int c = 0; c < c_count; ++c) {
    for (int j = 0; j < m; ++j) {
      spec.kappa(c, j) = std::exp(rng.uniform(lo, hi));
    }
  }

  // Fixed linear lift; identity when feature_dim == dims.
  const int f = config.feature_dim;
  if (f == m) {
    spec.lift = Matrix::Identity(f, m);
  } else {
    spec.lift = Matrix(f, m);
    for (int i = 0; i < f; ++i)
      for (int j = 0; j < m; ++j) spec.lift(i, j) = rng.gaussian();
    spec.lift /= std::sqrt(static_cast<double>(m));
    const auto qr = spec.lift.colPivHouseholderQr();
    if (qr.rank() < m) {
      throw NumericalError("SyntheticSpec: lift is rank deficient");
    }
  }
  return spec;
}

int LabeledDataset::num_classes() const {
  std::set<int> distinct(labels.begin(), labels.end());
  return static_cast<int>(distinct.size());
}

void LabeledDataset::validate() const {
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw DimensionMismatchError(
        "LabeledDataset: label count " + std::to_string(labels.size()) +
        " != feature count " + std::to_string(features.rows()));
  }
  if (!ambiguous.empty() && ambiguous.size() != labels.size()) {
    throw DimensionMismatchError("LabeledDataset: ambiguity flag count");
  }
  if (labels.empty()) throw DomainError("LabeledDataset: empty");
  const int c_count = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> counts(c_count, 0);
  for (int l : labels) {
    if (l < 0) throw DomainError("LabeledDataset: negative label");
    ++counts[l];
  }
  for (int c = 0; c < c_count; ++c) {
    if (counts[c] == 0) {
      throw DomainError("LabeledDataset: class " + std::to_string(c) +
                        " is empty");
    }
  }
}

GeneratedData generate(const SyntheticSpec& spec) {
  spec.config.validate();
  const auto& cfg = spec.config;
  const int n = cfg.samples_per_class;
  const int c_count = cfg.classes;
  const int m = cfg.dims;

  const auto spec_ptr = std::make_shared<const SyntheticSpec>(spec);
  const Rng root(cfg.seed);

  Matrix all_points(static_cast<Index>(n) * c_count, m);
  std::vector<int> labels(n * c_count);
  std::vector<bool> ambiguous(n * c_count);

  for (int c = 0; c < c_count; ++c) {
    const int n_amb = static_cast<int>(std::lround(cfg.ambiguity_fraction * n));
    const int n_clean = n - n_amb;
    const UnitVector mu = UnitVector::normalized(spec.mu.row(c).transpose());
    const Vector kdiag = spec.kappa.row(c).transpose();

    // Per-class derived seeds; clean and ambiguous draws get distinct streams.
    const std::uint64_t seed_clean = root.split(2 * c).next_u64();
    const std::uint64_t seed_amb = root.split(2 * c + 1).next_u64();

    std::vector<UnitVector> pts;
    pts.reserve(n);
    if (n_clean > 0) {
      auto clean =
          sample_nivmf_approx(NivmfParams(mu, kdiag), n_clean, seed_clean);
      pts.insert(pts.end(), clean.begin(), clean.end());
    }
    if (n_amb > 0) {
      auto amb = sample_nivmf_approx(
          NivmfParams(mu, cfg.ambiguity_multiplier * kdiag), n_amb, seed_amb);
      pts.insert(pts.end(), amb.begin(), amb.end());
    }
    for (int i = 0; i < n; ++i) {
      all_points.row(static_cast<Index>(c) * n + i) = pts[i].coords().transpose();
      labels[c * n + i] = c;
      ambiguous[c * n + i] = i >= n_clean;
    }
  }

  const Matrix features = all_points * spec.lift.transpose();

  // Class-stratified 50/50 split, shuffled per class with a derived stream.
  GeneratedData out;
  std::vector<Index> train_idx;
  std::vector<Index> test_idx;
  for (int c = 0; c < c_count; ++c) {
    std::vector<Index> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = static_cast<Index>(c) * n + i;
    Rng shuffle_rng = root.split(1000 + c);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_index(i + 1));
      std::swap(idx[i], idx[j]);
    }
    const int n_train = n / 2;
    for (int i = 0; i < n; ++i) {
      (i < n_train ? train_idx : test_idx).push_back(idx[i]);
    }
  }

  auto gather = [&](const std::vector<Index>& idx) {
    LabeledDataset d;
    d.features = Matrix(static_cast<Index>(idx.size()), features.cols());
    d.labels.resize(idx.size());
    d.ambiguous.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      d.features.row(static_cast<Index>(i)) = features.row(idx[i]);
      d.labels[i] = labels[idx[i]];
      d.ambiguous[i] = ambiguous[idx[i]];
    }
    d.spec = spec_ptr;
    d.validate();
    return d;
  };
  out.train = gather(train_idx);
  out.test = gather(test_idx);
  return out;
}

}  // namespace pdml
