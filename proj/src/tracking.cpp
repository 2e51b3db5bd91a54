#include "wildseg/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace wildseg::tracking {

Vec2 Trajectory::mean_position() const {
  double sx = 0.0, sy = 0.0;
  for (const auto& p : positions) {
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(positions.size());
  return {sx / n, sy / n};
}

std::string to_string(FeatureMode mode) { return mode == FeatureMode::Positions ? "positions" : "displacements"; }

FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "positions") return FeatureMode::Positions;
  if (s == "displacements") return FeatureMode::Displacements;
  fail("ConfigError", "feature mode must be positions or displacements, got '" + s + "'");
}

double euclidean(Vec2 a, Vec2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  return std::sqrt(dx * dx + dy * dy);
}

double euclidean(Point a, Point b) { return euclidean(Vec2{double(a.x), double(a.y)}, Vec2{double(b.x), double(b.y)}); }

double default_gate(int width, int height) { return 0.15 * std::hypot(double(width), double(height)); }

namespace {

struct Candidate {
  std::int64_t d2;
  int prev;
  int next;
};

std::int64_t cell_key(int cx, int cy) { return (std::int64_t(cx) << 32) ^ std::uint32_t(cy); }

}  // namespace

std::vector<Correspondence> match_edge_sets(const EdgeSet& prev, const EdgeSet& next, double gate) {
  if (!(gate > 0.0)) fail("ConfigError", "gate must be > 0");
  std::vector<Correspondence> out;
  if (prev.points.empty() || next.points.empty()) return out;

  // Bucket the next frame on a grid of cell size >= gate so that only the 3x3
  // neighborhood of a cell can hold points within the gate.
  const int cell = std::max(1, static_cast<int>(std::ceil(gate)));
  auto cell_of = [cell](int v) { return v >= 0 ? v / cell : -((-v + cell - 1) / cell); };
  std::unordered_map<std::int64_t, std::vector<int>> buckets;
  for (int j = 0; j < static_cast<int>(next.points.size()); ++j) {
    const Point& q = next.points[j];
    buckets[cell_key(cell_of(q.x), cell_of(q.y))].push_back(j);
  }

  std::vector<Candidate> cands;
  for (int i = 0; i < static_cast<int>(prev.points.size()); ++i) {
    const Point& p = prev.points[i];
    const int cx = cell_of(p.x), cy = cell_of(p.y);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const auto it = buckets.find(cell_key(cx + dx, cy + dy));
        if (it == buckets.end()) continue;
        for (int j : it->second) {
          const Point& q = next.points[j];
          if (euclidean(p, q) > gate) continue;
          const std::int64_t ddx = q.x - p.x, ddy = q.y - p.y;
          cands.push_back({ddx * ddx + ddy * ddy, i, j});
        }
      }
    }
  }
  // EdgeSet points are sorted, so index order is coordinate order.
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.prev != b.prev) return a.prev < b.prev;
    return a.next < b.next;
  });

  std::vector<std::uint8_t> used_prev(prev.points.size(), 0), used_next(next.points.size(), 0);
  const std::size_t limit = std::min(prev.points.size(), next.points.size());
  for (const Candidate& c : cands) {
    if (used_prev[c.prev] || used_next[c.next]) continue;
    used_prev[c.prev] = used_next[c.next] = 1;
    out.push_back({c.prev, c.next, std::sqrt(static_cast<double>(c.d2))});
    if (out.size() == limit) break;
  }
  return out;
}

TrajectorySet build_trajectories(std::span<const EdgeSet> edges, double gate, int min_length) {
  if (edges.size() < 2) fail("NeedMoreFrames", "tracking needs >= 2 frames");
  if (min_length < 2) fail("ConfigError", "min_length must be >= 2");

  struct Open {
    int start_frame;
    std::vector<Point> positions;
  };
  std::vector<Open> tracks;
  std::vector<int> track_of;  // per point of the current frame

  for (const Point& p : edges[0].points) {
    track_of.push_back(static_cast<int>(tracks.size()));
    tracks.push_back({0, {p}});
  }
  for (std::size_t t = 0; t + 1 < edges.size(); ++t) {
    const auto& cur = edges[t];
    const auto& nxt = edges[t + 1];
    std::vector<int> next_track(nxt.points.size(), -1);
    for (const auto& c : match_edge_sets(cur, nxt, gate)) {
      const int tr = track_of[c.index_prev];
      tracks[tr].positions.push_back(nxt.points[c.index_next]);
      next_track[c.index_next] = tr;
    }
    for (std::size_t j = 0; j < nxt.points.size(); ++j) {
      if (next_track[j] >= 0) continue;
      next_track[j] = static_cast<int>(tracks.size());
      tracks.push_back({static_cast<int>(t + 1), {nxt.points[j]}});
    }
    track_of = std::move(next_track);
  }

  std::vector<Open*> kept;
  for (auto& tr : tracks) {
    if (static_cast<int>(tr.positions.size()) >= min_length) kept.push_back(&tr);
  }
  std::sort(kept.begin(), kept.end(), [](const Open* a, const Open* b) {
    if (a->start_frame != b->start_frame) return a->start_frame < b->start_frame;
    return a->positions.front() < b->positions.front();
  });

  TrajectorySet set;
  set.frame_count = static_cast<int>(edges.size());
  set.trajectories.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    set.trajectories.push_back({static_cast<int>(i), kept[i]->start_frame, std::move(kept[i]->positions)});
  }
  return set;
}

Window select_window(const TrajectorySet& set, double min_coverage, int min_window) {
  const int T = set.frame_count;
  if (T < 2) fail("NeedMoreFrames", "window selection needs >= 2 frames");
  min_window = std::clamp(min_window, 2, T);

  // alive[t] = trajectories present at frame t; prefix sums give window means.
  std::vector<double> alive_prefix(T + 1, 0.0);
  {
    std::vector<int> alive(T, 0);
    for (const auto& tr : set.trajectories) {
      for (int f = tr.start_frame; f < tr.end_frame(); ++f) ++alive[f];
    }
    for (int t = 0; t < T; ++t) alive_prefix[t + 1] = alive_prefix[t] + alive[t];
  }

  Window best{0, 0};
  std::vector<int> ends;
  for (int s = 0; s + min_window <= T; ++s) {
    ends.clear();
    for (const auto& tr : set.trajectories) {
      if (tr.covers(s)) ends.push_back(tr.end_frame());
    }
    std::sort(ends.begin(), ends.end());
    // Lengths scanned upward, so the count of spanning tracks only shrinks.
    std::size_t k = 0;
    int longest = 0;
    for (int len = min_window; len <= T - s; ++len) {
      while (k < ends.size() && ends[k] < s + len) ++k;
      const double span = static_cast<double>(ends.size() - k);
      if (span <= 0.0) break;
      const double mean_alive = (alive_prefix[s + len] - alive_prefix[s]) / len;
      if (span >= min_coverage * mean_alive) longest = len;
    }
    if (longest > best.length) best = {s, longest};
  }
  if (best.length == 0) best = {0, min_window};
  return best;
}

FeatureMatrix to_feature_matrix(const TrajectorySet& set, FeatureMode mode, Window window) {
  if (window.length < 2) fail("ConfigError", "window must span >= 2 frames");
  FeatureMatrix fm;
  fm.mode = mode;
  fm.dim = mode == FeatureMode::Positions ? 2 * window.length : 2 * (window.length - 1);
  const int first = window.start_frame;
  const int last = window.start_frame + window.length - 1;
  for (const auto& tr : set.trajectories) {
    if (!tr.covers(first) || !tr.covers(last)) {
      fm.excluded_ids.push_back(tr.id);
      continue;
    }
    fm.row_ids.push_back(tr.id);
    if (mode == FeatureMode::Positions) {
      for (int f = first; f <= last; ++f) {
        fm.values.push_back(tr.at_frame(f).x);
        fm.values.push_back(tr.at_frame(f).y);
      }
    } else {
      for (int f = first + 1; f <= last; ++f) {
        fm.values.push_back(tr.at_frame(f).x - tr.at_frame(f - 1).x);
        fm.values.push_back(tr.at_frame(f).y - tr.at_frame(f - 1).y);
      }
    }
  }
  if (fm.row_ids.empty()) fail("EmptyFeatureMatrix", "no trajectory spans the window");
  return fm;
}

}  // namespace wildseg::tracking
