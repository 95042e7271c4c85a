#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdml/types.hpp"

namespace pdml {

enum class RetrievalMetric { kCosine, kEuclidean };

RetrievalMetric retrieval_metric_from_string(const std::string& name);
std::string to_string(RetrievalMetric m);

struct RetrievalReport {
  std::map<int, double> recall_at;
  double map_at_r = 0.0;
  int r = 0;
  RetrievalMetric metric = RetrievalMetric::kCosine;
};

// Fraction of queries whose K nearest candidates (self excluded, ties broken
// by candidate index) contain at least one same-label item.
double recall_at_k(const Matrix& embeddings, const std::vector<int>& labels,
                   int k, RetrievalMetric metric);

// Mean over queries of average precision truncated at R retrieved
// candidates, with R capped at the query's relevant count.
double map_at_r(const Matrix& embeddings, const std::vector<int>& labels, int r,
                RetrievalMetric metric);

RetrievalReport retrieval_report(const Matrix& embeddings,
                                 const std::vector<int>& labels,
                                 const std::vector<int>& recall_ks, int r,
                                 RetrievalMetric metric);

struct DiversityReport {
  // Normalized entropy of the sorted singular-value distribution of the
  // centered embedding matrix; 0 when all embeddings coincide, near 1 for an
  // isotropic cloud.
  double feature_diversity = 0.0;
  // Mean over classes of the variance of pairwise intraclass cosine
  // distances.
  double cluster_diversity = 0.0;
  int skipped_classes = 0;  // classes with one member carry no pair distances
};

DiversityReport diversity_metrics(const Matrix& embeddings,
                                  const std::vector<int>& labels);

struct NormHistogram {
  Vector bin_edges;                  // bins + 1, shared across groups
  std::map<int, Eigen::VectorXi> group_counts;
  std::map<int, double> group_mean_norm;
};

// Histogram of embedding norms split by the caller-supplied partition.
NormHistogram norm_histogram(const Matrix& raw_embeddings,
                             const std::vector<int>& groups, int bins);

// One-sided Mann-Whitney rank-sum p-value (normal approximation with tie
// correction) for the alternative "values in a tend smaller than in b".
double rank_sum_pvalue_less(const std::vector<double>& a,
                            const std::vector<double>& b);

}  // namespace pdml
