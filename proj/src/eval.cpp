#include "wildseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace wildseg::eval {

namespace {

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

double adjusted_rand_index(const Assignment& pred, const Assignment& truth) {
  if (pred.ids != truth.ids) fail("LabelMismatch", "prediction and truth cover different trajectories");
  const std::size_t n = pred.ids.size();
  if (n == 0) fail("LabelMismatch", "empty universe");

  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{pred.labels[i], truth.labels[i]}] += 1.0;
    rows[pred.labels[i]] += 1.0;
    cols[truth.labels[i]] += 1.0;
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, v] : table) index += choose2(v);
  for (const auto& [key, v] : rows) sum_rows += choose2(v);
  for (const auto& [key, v] : cols) sum_cols += choose2(v);
  const double total = choose2(static_cast<double>(n));
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double mean_log_likelihood(const FeatureMatrix& features, const Assignment& assignment, double var_floor) {
  if (!(var_floor > 0.0)) fail("ConfigError", "var_floor must be > 0");
  const int k = assignment.k;
  const int dim = features.dim;
  std::vector<int> label(features.rows());
  std::vector<int> count(k, 0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    label[r] = assignment.label_of(features.row_ids[r]);
    if (label[r] < 0 || label[r] >= k) fail("LabelMismatch", "label outside 0..k-1");
    ++count[label[r]];
  }
  for (int c = 0; c < k; ++c) {
    if (count[c] == 0) fail("EmptyCluster", "cluster " + std::to_string(c));
  }

  std::vector<double> mean(static_cast<std::size_t>(k) * dim, 0.0), var(mean.size(), 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    for (int d = 0; d < dim; ++d) mean[label[r] * dim + d] += x[d];
  }
  for (int c = 0; c < k; ++c) {
    for (int d = 0; d < dim; ++d) mean[c * dim + d] /= count[c];
  }
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    for (int d = 0; d < dim; ++d) {
      const double t = x[d] - mean[label[r] * dim + d];
      var[label[r] * dim + d] += t * t;
    }
  }
  for (int c = 0; c < k; ++c) {
    for (int d = 0; d < dim; ++d) var[c * dim + d] = std::max(var[c * dim + d] / count[c], var_floor);
  }

  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double total = 0.0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    double ll = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double v = var[label[r] * dim + d];
      const double t = x[d] - mean[label[r] * dim + d];
      ll += -0.5 * (kLog2Pi + std::log(v)) - 0.5 * t * t / v;
    }
    total += ll;
  }
  return total / static_cast<double>(features.rows());
}

double region_iou(const LabelGrid& pred, int pred_label, const LabelGrid& truth, int truth_label) {
  require_same_dims(pred, truth);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool a = pred.data[i] == pred_label;
    const bool b = truth.data[i] == truth_label;
    inter += (a && b);
    uni += (a || b);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double part_average_precision(const std::vector<render::PartSegmentation>& pred, const std::vector<LabelGrid>& truth,
                              double iou_threshold) {
  if (pred.size() != truth.size()) {
    fail("FrameMismatch", std::to_string(pred.size()) + " predicted vs " + std::to_string(truth.size()) + " truth");
  }
  if (pred.empty()) fail("FrameMismatch", "no frames");

  double sum = 0.0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const LabelGrid& p = pred[f].labels;
    const LabelGrid& t = truth[f];
    require_same_dims(p, t);

    // Intersection and area counts in one pass.
    std::map<int, std::size_t> parea, tarea;
    std::map<std::pair<int, int>, std::size_t> inter;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const int a = p.data[i], b = t.data[i];
      if (a != kBackground) ++parea[a];
      if (b != kBackground) ++tarea[b];
      if (a != kBackground && b != kBackground) ++inter[{a, b}];
    }
    if (parea.empty()) {
      sum += tarea.empty() ? 1.0 : 0.0;
      continue;
    }
    struct Cand {
      double iou;
      int p, t;
    };
    std::vector<Cand> cands;
    for (const auto& [key, n] : inter) {
      const double u = static_cast<double>(parea[key.first] + tarea[key.second] - n);
      cands.push_back({static_cast<double>(n) / u, key.first, key.second});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.p != b.p) return a.p < b.p;
      return a.t < b.t;
    });
    std::map<int, bool> pused, tused;
    int tp = 0;
    for (const auto& c : cands) {
      if (pused[c.p] || tused[c.t]) continue;
      pused[c.p] = tused[c.t] = true;
      if (c.iou >= iou_threshold) ++tp;
    }
    sum += static_cast<double>(tp) / static_cast<double>(parea.size());
  }
  return sum / static_cast<double>(pred.size());
}

std::vector<int> trajectory_truth_labels(const tracking::TrajectorySet& set, const std::vector<int>& ids,
                                         const std::vector<LabelGrid>& masks, int search_radius) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (int id : ids) {
    const auto& tr = set.by_id(id);
    std::map<int, int> votes;
    for (int f = tr.start_frame; f < tr.end_frame(); ++f) {
      if (f >= static_cast<int>(masks.size())) break;
      const LabelGrid& m = masks[f];
      const Point p = tr.at_frame(f);
      int part = m.contains(p.x, p.y) ? m.at(p.x, p.y) : kBackground;
      if (part == kBackground) {
        int best_d2 = search_radius * search_radius + 1;
        for (int dy = -search_radius; dy <= search_radius; ++dy) {
          for (int dx = -search_radius; dx <= search_radius; ++dx) {
            const int x = p.x + dx, y = p.y + dy;
            if (!m.contains(x, y) || m.at(x, y) == kBackground) continue;
            const int d2 = dx * dx + dy * dy;
            if (d2 < best_d2 || (d2 == best_d2 && m.at(x, y) < part)) {
              best_d2 = d2;
              part = m.at(x, y);
            }
          }
        }
      }
      if (part != kBackground) ++votes[part];
    }
    int best = -1, best_votes = 0;
    for (const auto& [part, n] : votes) {
      if (n > best_votes) {
        best = part;
        best_votes = n;
      }
    }
    out.push_back(best);
  }
  return out;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["ari"] = report.ari ? nlohmann::ordered_json(*report.ari) : nlohmann::ordered_json(nullptr);
  j["mean_ll"] = report.mean_ll;
  j["ap"] = report.ap ? nlohmann::ordered_json(*report.ap) : nlohmann::ordered_json(nullptr);
  j["k"] = report.k;
  auto clusters = nlohmann::ordered_json::array();
  for (const auto& c : report.clusters) {
    clusters.push_back({{"label", c.label}, {"size", c.size}, {"intra_distance", c.intra_distance},
                        {"centroid", c.centroid}});
  }
  j["clusters"] = std::move(clusters);
  return j.dump(2) + "\n";
}

std::string to_csv(const MetricsReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "ari,mean_ll,ap,k\n";
  if (report.ari) os << *report.ari;
  os << ',' << report.mean_ll << ',';
  if (report.ap) os << *report.ap;
  os << ',' << report.k << '\n';
  return os.str();
}

}  // namespace wildseg::eval
