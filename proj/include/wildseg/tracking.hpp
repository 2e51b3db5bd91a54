#pragma once

#include <span>
#include <string>
#include <vector>

#include "wildseg/edges.hpp"
#include "wildseg/image.hpp"

namespace wildseg::tracking {

using edges::EdgeSet;

struct Correspondence {
  int index_prev = 0;  // position in the previous EdgeSet
  int index_next = 0;  // position in the next EdgeSet
  double distance = 0.0;
  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

struct Trajectory {
  int id = 0;
  int start_frame = 0;
  std::vector<Point> positions;  // one per consecutive frame from start_frame

  int end_frame() const { return start_frame + static_cast<int>(positions.size()); }  // exclusive
  bool covers(int frame) const { return frame >= start_frame && frame < end_frame(); }
  const Point& at_frame(int frame) const { return positions[frame - start_frame]; }
  Vec2 mean_position() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrajectorySet {
  int frame_count = 0;
  std::vector<Trajectory> trajectories;  // ordered by id, ids are 0..n-1

  const Trajectory& by_id(int id) const { return trajectories.at(id); }
  friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;
};

enum class FeatureMode { Positions, Displacements };
std::string to_string(FeatureMode mode);
FeatureMode parse_feature_mode(const std::string& s);

struct Window {
  int start_frame = 0;
  int length = 0;  // frames
  friend bool operator==(const Window&, const Window&) = default;
};

// Row i belongs to trajectory row_ids[i]; rows follow ascending id.
struct FeatureMatrix {
  FeatureMode mode = FeatureMode::Displacements;
  int dim = 0;
  std::vector<int> row_ids;
  std::vector<int> excluded_ids;  // trajectories that did not span the window
  std::vector<double> values;     // row-major, rows() x dim

  std::size_t rows() const { return row_ids.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, static_cast<std::size_t>(dim)}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, static_cast<std::size_t>(dim)}; }
  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

double euclidean(Vec2 a, Vec2 b);
double euclidean(Point a, Point b);

// One-to-one greedy matching: every pair within `gate`, visited in ascending
// (distance, prev point, next point) order, is accepted when both endpoints
// are still free. Result is in acceptance order.
std::vector<Correspondence> match_edge_sets(const EdgeSet& prev, const EdgeSet& next, double gate);

// Chains correspondences over consecutive frames. Unmatched next-frame pixels
// start new tracks; tracks shorter than min_length are dropped. Ids follow
// (start_frame, first position) order.
TrajectorySet build_trajectories(std::span<const EdgeSet> edges, double gate, int min_length);

// Longest window whose spanning trajectories number at least min_coverage
// times the mean per-frame count of live trajectories inside it (earliest
// start on ties).
Window select_window(const TrajectorySet& set, double min_coverage, int min_window = 2);

FeatureMatrix to_feature_matrix(const TrajectorySet& set, FeatureMode mode, Window window);

// 0.15 x frame diagonal.
double default_gate(int width, int height);

}  // namespace wildseg::tracking
