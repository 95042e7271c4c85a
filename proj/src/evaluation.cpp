#include "pdml/evaluation.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pdml/errors.hpp"

namespace pdml {

RetrievalMetric retrieval_metric_from_string(const std::string& name) {
  if (name == "cosine") return RetrievalMetric::kCosine;
  if (name == "euclidean") return RetrievalMetric::kEuclidean;
  throw DomainError("unknown retrieval metric: " + name);
}

std::string to_string(RetrievalMetric m) {
  return m == RetrievalMetric::kCosine ? "cosine" : "euclidean";
}

namespace {

void check_labels(const Matrix& embeddings, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != embeddings.rows()) {
    throw DimensionMismatchError("retrieval: labels/embeddings size mismatch");
  }
  if (embeddings.rows() < 2) {
    throw DomainError("retrieval: need >= 2 samples");
  }
}

// Candidate order for one query: ascending distance, ties by index.
std::vector<Index> ranked_candidates(const Matrix& emb, const Matrix& unit_emb,
                                     Index query, RetrievalMetric metric) {
  const Index n = emb.rows();
  Vector dist(n);
  if (metric == RetrievalMetric::kCosine) {
    dist = -(unit_emb * unit_emb.row(query).transpose());
  } else {
    dist = (emb.rowwise() - emb.row(query)).rowwise().squaredNorm();
  }
  std::vector<Index> order;
  order.reserve(n - 1);
  for (Index i = 0; i < n; ++i) {
    if (i != query) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (dist(a) != dist(b)) return dist(a) < dist(b);
    return a < b;
  });
  return order;
}

Matrix row_normalized(const Matrix& emb) {
  Matrix unit = emb;
  for (Index i = 0; i < unit.rows(); ++i) {
    const double n = unit.row(i).norm();
    if (n == 0.0) throw DomainError("retrieval: zero embedding under cosine");
    unit.row(i) /= n;
  }
  return unit;
}

}  // namespace

double recall_at_k(const Matrix& embeddings, const std::vector<int>& labels,
                   int k, RetrievalMetric metric) {
  check_labels(embeddings, labels);
  const Index n = embeddings.rows();
  if (k < 1 || k >= n) {
    throw DomainError("recall_at_k: K must be in [1, n-1]");
  }
  const Matrix unit = metric == RetrievalMetric::kCosine
                          ? row_normalized(embeddings)
                          : Matrix();
  Index hits = 0;
  for (Index q = 0; q < n; ++q) {
    const auto order = ranked_candidates(embeddings, unit, q, metric);
    for (int i = 0; i < k; ++i) {
      if (labels[order[i]] == labels[q]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double map_at_r(const Matrix& embeddings, const std::vector<int>& labels, int r,
                RetrievalMetric metric) {
  check_labels(embeddings, labels);
  if (r < 1) throw DomainError("map_at_r: R must be >= 1");
  const Index n = embeddings.rows();
  const Matrix unit = metric == RetrievalMetric::kCosine
                          ? row_normalized(embeddings)
                          : Matrix();
  double total = 0.0;
  Index counted = 0;
  for (Index q = 0; q < n; ++q) {
    Index relevant = 0;
    for (Index i = 0; i < n; ++i) {
      if (i != q && labels[i] == labels[q]) ++relevant;
    }
    if (relevant == 0) continue;  // no retrievable positives for this query
    const Index r_q = std::min<Index>(r, relevant);
    const auto order = ranked_candidates(embeddings, unit, q, metric);
    double ap = 0.0;
    Index hits = 0;
    for (Index i = 0; i < r_q; ++i) {
      if (labels[order[i]] == labels[q]) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(i + 1);
      }
    }
    total += ap / static_cast<double>(r_q);
    ++counted;
  }
  if (counted == 0) throw DomainError("map_at_r: no query has a positive");
  return total / static_cast<double>(counted);
}

RetrievalReport retrieval_report(const Matrix& embeddings,
                                 const std::vector<int>& labels,
                                 const std::vector<int>& recall_ks, int r,
                                 RetrievalMetric metric) {
  RetrievalReport report;
  report.metric = metric;
  report.r = r;
  for (int k : recall_ks) {
    report.recall_at[k] = recall_at_k(embeddings, labels, k, metric);
  }
  report.map_at_r = map_at_r(embeddings, labels, r, metric);
  return report;
}

DiversityReport diversity_metrics(const Matrix& embeddings,
                                  const std::vector<int>& labels) {
  check_labels(embeddings, labels);
  DiversityReport report;

  // Feature diversity: entropy of the normalized singular-value spectrum.
  const Matrix centered = embeddings.rowwise() - embeddings.colwise().mean();
  const Eigen::JacobiSVD<Matrix> svd(centered);
  const Vector sv = svd.singularValues();
  const double total = sv.sum();
  if (total < 1e-12) {
    report.feature_diversity = 0.0;
  } else {
    double entropy = 0.0;
    for (Index i = 0; i < sv.size(); ++i) {
      const double p = sv(i) / total;
      if (p > 0.0) entropy -= p * std::log(p);
    }
    report.feature_diversity =
        sv.size() > 1 ? entropy / std::log(static_cast<double>(sv.size())) : 0.0;
  }

  // Cluster diversity: variance of pairwise intraclass cosine distances.
  const Matrix unit = row_normalized(embeddings);
  std::set<int> classes(labels.begin(), labels.end());
  double acc = 0.0;
  int used = 0;
  for (int c : classes) {
    std::vector<Index> members;
    for (Index i = 0; i < unit.rows(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    if (members.size() < 2) {
      ++report.skipped_classes;
      continue;
    }
    std::vector<double> dists;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        dists.push_back(1.0 - unit.row(members[i]).dot(unit.row(members[j])));
      }
    }
    const double mean =
        std::accumulate(dists.begin(), dists.end(), 0.0) / dists.size();
    double var = 0.0;
    for (double d : dists) var += (d - mean) * (d - mean);
    var /= static_cast<double>(dists.size());
    acc += var;
    ++used;
  }
  report.cluster_diversity = used > 0 ? acc / used : 0.0;
  return report;
}

NormHistogram norm_histogram(const Matrix& raw_embeddings,
                             const std::vector<int>& groups, int bins) {
  if (static_cast<Index>(groups.size()) != raw_embeddings.rows()) {
    throw DimensionMismatchError("norm_histogram: group size mismatch");
  }
  if (bins < 2) throw DomainError("norm_histogram: bins must be >= 2");
  const Index n = raw_embeddings.rows();
  Vector norms(n);
  for (Index i = 0; i < n; ++i) norms(i) = raw_embeddings.row(i).norm();

  double lo = norms.minCoeff();
  double hi = norms.maxCoeff();
  if (hi <= lo) hi = lo + 1.0;  // all norms equal: one occupied bin

  NormHistogram hist;
  hist.bin_edges = Vector::LinSpaced(bins + 1, lo, hi);
  std::map<int, std::vector<double>> by_group;
  for (Index i = 0; i < n; ++i) by_group[groups[i]].push_back(norms(i));
  for (const auto& [g, values] : by_group) {
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(bins);
    double mean = 0.0;
    for (double v : values) {
      int b = static_cast<int>((v - lo) / (hi - lo) * bins);
      b = std::clamp(b, 0, bins - 1);
      ++counts(b);
      mean += v;
    }
    hist.group_counts[g] = counts;
    hist.group_mean_norm[g] = mean / static_cast<double>(values.size());
  }
  return hist;
}

double rank_sum_pvalue_less(const std::vector<double>& a,
                            const std::vector<double>& b) {
  if (a.empty() || b.empty()) {
    throw DomainError("rank_sum_pvalue_less: empty sample");
  }
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  std::vector<std::pair<double, int>> pooled;  // (value, origin)
  pooled.reserve(na + nb);
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end());

  // Average ranks over ties; accumulate the rank sum of sample a and the tie
  // correction term sum(t^3 - t).
  const std::size_t n = na + nb;
  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_a += avg_rank;
    }
    i = j;
  }
  const double u_a =
      rank_sum_a - 0.5 * static_cast<double>(na) * (na + 1);  // Mann-Whitney U
  const double mean_u = 0.5 * static_cast<double>(na) * nb;
  const double var_u =
      (static_cast<double>(na) * nb / 12.0) *
      (static_cast<double>(n + 1) -
       tie_term / (static_cast<double>(n) * (n - 1)));
  if (var_u <= 0.0) return 1.0;  // all values tied
  // Continuity-corrected one-sided tail P(U <= u_a).
  const double z = (u_a + 0.5 - mean_u) / std::sqrt(var_u);
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

}  // namespace pdml
