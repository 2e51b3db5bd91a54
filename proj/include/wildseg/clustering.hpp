#pragma once

#include <span>
#include <string>
#include <vector>

#include "wildseg/tracking.hpp"

namespace wildseg::clustering {

using tracking::FeatureMatrix;

struct Merge {
  int a = 0;  // node holding the smaller minimum leaf
  int b = 0;
  double distance = 0.0;
  int node = 0;
  friend bool operator==(const Merge&, const Merge&) = default;
};

// Leaves 0..n-1 are feature rows; merge k creates node n + k.
struct Dendrogram {
  int leaves = 0;
  std::vector<Merge> merges;
  friend bool operator==(const Dendrogram&, const Dendrogram&) = default;
};

// Flat labeling. ids ascend; labels are 0..k-1 numbered by first appearance.
struct Assignment {
  std::vector<int> ids;
  std::vector<int> labels;
  int k = 0;

  int label_of(int id) const;  // throws LabelMismatch for unknown ids
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct CutCriterion {
  enum class Kind { ExactK, Threshold, Auto };
  Kind kind = Kind::Auto;
  int k = 0;
  double threshold = 0.0;

  static CutCriterion exact(int k) { return {Kind::ExactK, k, 0.0}; }
  static CutCriterion at_distance(double t) { return {Kind::Threshold, 0, t}; }
  static CutCriterion automatic() { return {}; }
};

// Number of trailing merges the auto cut inspects.
inline constexpr int kAutoCutWindow = 32;

std::vector<double> centroid(std::span<const std::vector<double>> members);
double mean_intra_distance(std::span<const std::vector<double>> members);

double row_distance(std::span<const double> a, std::span<const double> b);

// Complete linkage, D(A, B) = max ||a - b||. Ties go to the pair with the
// smallest (min leaf of A, min leaf of B).
Dendrogram complete_linkage(std::span<const double> values, int rows, int dim);
Dendrogram complete_linkage(const FeatureMatrix& features);

// Labels the leaves; `leaf_ids` (default 0..n-1) become Assignment::ids and
// must ascend.
Assignment cut(const Dendrogram& dendro, const CutCriterion& criterion, std::span<const int> leaf_ids = {});

// Rewrites labels to 0..k-1 by first appearance in id order.
Assignment canonicalize(std::vector<int> ids, std::vector<int> labels);

struct ClusterStats {
  int label = 0;
  int size = 0;
  std::vector<double> centroid;
  double intra_distance = 0.0;
};

// Per-cluster centroid and mean intra-cluster distance; assignment ids must
// be the feature row ids.
std::vector<ClusterStats> cluster_diagnostics(const FeatureMatrix& features, const Assignment& assignment);

}  // namespace wildseg::clustering
