#include "wildseg/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace wildseg::clustering {

int Assignment::label_of(int id) const {
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) fail("LabelMismatch", "no label for trajectory " + std::to_string(id));
  return labels[it - ids.begin()];
}

std::vector<double> centroid(std::span<const std::vector<double>> members) {
  if (members.empty()) fail("EmptyCluster");
  const std::size_t dim = members.front().size();
  std::vector<double> c(dim, 0.0);
  for (const auto& m : members) {
    if (m.size() != dim) fail("DimError", "cluster members differ in dimension");
    for (std::size_t d = 0; d < dim; ++d) c[d] += m[d];
  }
  for (auto& v : c) v /= static_cast<double>(members.size());
  return c;
}

double row_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return std::sqrt(s);
}

double mean_intra_distance(std::span<const std::vector<double>> members) {
  const auto c = centroid(members);
  double total = 0.0;
  for (const auto& m : members) total += row_distance(m, c);
  return total / static_cast<double>(members.size());
}

namespace {

// Condensed strict upper triangle of an n x n symmetric matrix.
class Triangle {
 public:
  explicit Triangle(int n) : n_(n), d_(static_cast<std::size_t>(n) * (n - 1) / 2) {}
  double& operator()(int i, int j) {
    if (i > j) std::swap(i, j);
    return d_[offset(i) + (j - i - 1)];
  }

 private:
  std::size_t offset(int i) const { return static_cast<std::size_t>(i) * (2 * n_ - i - 1) / 2; }
  int n_;
  std::vector<double> d_;
};

}  // namespace

Dendrogram complete_linkage(std::span<const double> values, int rows, int dim) {
  if (rows < 1) fail("EmptyFeatureMatrix", "clustering needs >= 1 row");
  if (values.size() != static_cast<std::size_t>(rows) * dim) fail("DimError", "feature buffer size");
  const int n = rows;
  Dendrogram dendro;
  dendro.leaves = n;
  if (n == 1) return dendro;

  Triangle dist(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) dist(i, j) = row_distance(values.subspan(std::size_t(i) * dim, dim),
                                                              values.subspan(std::size_t(j) * dim, dim));
  }

  // Slot i always holds the active cluster whose smallest leaf is i, so slot
  // order is the tie-break order. nn[i] caches the best partner j > i.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<char> active(n, 1);
  std::vector<int> node(n);
  std::iota(node.begin(), node.end(), 0);
  std::vector<int> nn(n, -1);
  std::vector<double> nnd(n, kInf);

  auto refresh = [&](int i) {
    nn[i] = -1;
    nnd[i] = kInf;
    for (int j = i + 1; j < n; ++j) {
      if (!active[j]) continue;
      const double d = dist(i, j);
      if (d < nnd[i]) {
        nnd[i] = d;
        nn[i] = j;
      }
    }
  };
  for (int i = 0; i < n; ++i) refresh(i);

  for (int step = 0; step < n - 1; ++step) {
    int i = -1;
    for (int s = 0; s < n; ++s) {
      if (active[s] && nn[s] >= 0 && (i < 0 || nnd[s] < nnd[i])) i = s;
    }
    const int j = nn[i];
    dendro.merges.push_back({node[i], node[j], nnd[i], n + step});
    node[i] = n + step;
    active[j] = 0;
    for (int k = 0; k < n; ++k) {
      if (!active[k] || k == i) continue;
      dist(i, k) = std::max(dist(i, k), dist(j, k));
    }
    refresh(i);
    for (int k = 0; k < i; ++k) {
      if (active[k] && (nn[k] == i || nn[k] == j)) refresh(k);
    }
    for (int k = i + 1; k < j; ++k) {
      if (active[k] && nn[k] == j) refresh(k);
    }
  }
  return dendro;
}

Dendrogram complete_linkage(const FeatureMatrix& features) {
  return complete_linkage(features.values, static_cast<int>(features.rows()), features.dim);
}

Assignment canonicalize(std::vector<int> ids, std::vector<int> labels) {
  if (ids.size() != labels.size()) fail("LabelMismatch", "ids and labels differ in length");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  Assignment out;
  std::vector<std::pair<int, int>> remap;  // old label -> new label
  for (std::size_t idx : order) {
    const int old = labels[idx];
    auto it = std::find_if(remap.begin(), remap.end(), [old](const auto& p) { return p.first == old; });
    if (it == remap.end()) {
      remap.emplace_back(old, static_cast<int>(remap.size()));
      it = remap.end() - 1;
    }
    out.ids.push_back(ids[idx]);
    out.labels.push_back(it->second);
  }
  out.k = static_cast<int>(remap.size());
  return out;
}

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

int merges_kept(const Dendrogram& dendro, const CutCriterion& criterion) {
  const int n = dendro.leaves;
  const int m = static_cast<int>(dendro.merges.size());
  switch (criterion.kind) {
    case CutCriterion::Kind::ExactK:
      if (criterion.k < 1 || criterion.k > n) {
        fail("BadK", "k=" + std::to_string(criterion.k) + " outside [1, " + std::to_string(n) + "]");
      }
      return n - criterion.k;
    case CutCriterion::Kind::Threshold: {
      if (!(criterion.threshold >= 0.0)) fail("ConfigError", "cut threshold must be >= 0");
      int kept = 0;
      while (kept < m && dendro.merges[kept].distance <= criterion.threshold) ++kept;
      return kept;
    }
    case CutCriterion::Kind::Auto: {
      // Largest gap between consecutive distances among the final merges;
      // keep every merge up to the lower side of that gap. Equal gaps go to
      // the later one (fewer clusters).
      const int window = std::min(m, kAutoCutWindow);
      if (window < 2) return m;
      int best = -1;
      double best_gap = -1.0;
      for (int q = m - window; q + 1 < m; ++q) {
        const double gap = dendro.merges[q + 1].distance - dendro.merges[q].distance;
        if (gap >= best_gap) {
          best_gap = gap;
          best = q;
        }
      }
      return best + 1;
    }
  }
  return m;
}

}  // namespace

Assignment cut(const Dendrogram& dendro, const CutCriterion& criterion, std::span<const int> leaf_ids) {
  const int n = dendro.leaves;
  if (!leaf_ids.empty() && static_cast<int>(leaf_ids.size()) != n) fail("LabelMismatch", "leaf id count");
  const int kept = merges_kept(dendro, criterion);

  std::vector<int> parent(2 * n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int q = 0; q < kept; ++q) {
    const auto& mg = dendro.merges[q];
    parent[find_root(parent, mg.a)] = mg.node;
    parent[find_root(parent, mg.b)] = mg.node;
  }
  std::vector<int> ids(n), roots(n);
  for (int leaf = 0; leaf < n; ++leaf) {
    ids[leaf] = leaf_ids.empty() ? leaf : leaf_ids[leaf];
    roots[leaf] = find_root(parent, leaf);
  }
  return canonicalize(std::move(ids), std::move(roots));
}

std::vector<ClusterStats> cluster_diagnostics(const FeatureMatrix& features, const Assignment& assignment) {
  std::vector<std::vector<std::vector<double>>> members(assignment.k);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto row = features.row(r);
    members[assignment.label_of(features.row_ids[r])].emplace_back(row.begin(), row.end());
  }
  std::vector<ClusterStats> stats;
  for (int c = 0; c < assignment.k; ++c) {
    if (members[c].empty()) continue;
    stats.push_back({c, static_cast<int>(members[c].size()), centroid(members[c]), mean_intra_distance(members[c])});
  }
  return stats;
}

}  // namespace wildseg::clustering
