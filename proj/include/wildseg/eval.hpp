#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wildseg/clustering.hpp"
#include "wildseg/render.hpp"
#include "wildseg/tracking.hpp"

namespace wildseg::eval {

using clustering::Assignment;
using tracking::FeatureMatrix;

struct GroundTruth {
  Assignment trajectories;       // per-trajectory part label
  std::vector<LabelGrid> masks;  // per-frame per-pixel part id, kBackground elsewhere
};

struct MetricsReport {
  std::optional<double> ari;
  double mean_ll = 0.0;
  std::optional<double> ap;
  int k = 0;
  std::vector<clustering::ClusterStats> clusters;
};

// Standard ARI from the contingency table. The two assignments must label
// the same ids (LabelMismatch otherwise). Two trivial partitions that agree
// score 1.
double adjusted_rand_index(const Assignment& pred, const Assignment& truth);

// Diagonal Gaussian per cluster (ML fit, per-dimension variance floored at
// var_floor); mean over rows of the log density under the row's own cluster.
double mean_log_likelihood(const FeatureMatrix& features, const Assignment& assignment, double var_floor);

// Intersection-over-union of two label regions.
double region_iou(const LabelGrid& pred, int pred_label, const LabelGrid& truth, int truth_label);

// Per frame: greedy highest-IoU matching of predicted parts to truth parts;
// a predicted part is a true positive when its match reaches iou_threshold.
// Frame score = TP / predicted parts (1 when both sides are empty), averaged
// over frames.
double part_average_precision(const std::vector<render::PartSegmentation>& pred, const std::vector<LabelGrid>& truth,
                              double iou_threshold = 0.5);

// Majority part id along each trajectory's path (ties to the smaller id).
// Path pixels off the part masks borrow the id of the nearest part pixel
// within `search_radius`; trajectories with no such pixel get label -1.
std::vector<int> trajectory_truth_labels(const tracking::TrajectorySet& set, const std::vector<int>& ids,
                                         const std::vector<LabelGrid>& masks, int search_radius = 2);

std::string to_json(const MetricsReport& report);
std::string to_csv(const MetricsReport& report);

}  // namespace wildseg::eval
