#include <algorithm>
#include <iterator>
#include <map>
#include <numeric>
#include <set>

#include "oracles/oracles.hpp"
#include "unit/util.hpp"
#include "wildseg/clustering.hpp"

using namespace wildseg;
using namespace wildseg::clustering;

namespace {

std::set<std::set<int>> partition(const Assignment& a, const std::vector<int>& ids_to_leaf = {}) {
  std::map<int, std::set<int>> groups;
  for (std::size_t i = 0; i < a.ids.size(); ++i)
    groups[a.labels[i]].insert(ids_to_leaf.empty() ? a.ids[i] : ids_to_leaf[a.ids[i]]);
  std::set<std::set<int>> out;
  for (auto& [l, g] : groups) out.insert(g);
  return out;
}

std::vector<double> random_rows(Rng& rng, int n, int dim, bool integer = false) {
  std::vector<double> v(n * dim);
  for (auto& x : v) x = integer ? double(rng.below(4)) : rng.uniform(-5.0, 5.0);
  return v;
}

}  // namespace

TEST_CASE("centroid and mean_intra_distance examples") {
  const std::vector<std::vector<double>> one{{3, -2}};
  CHECK(centroid(one) == std::vector<double>{3, -2});
  CHECK(mean_intra_distance(one) == 0.0);
  const std::vector<std::vector<double>> two{{0, 0}, {2, 2}};
  CHECK(centroid(two) == std::vector<double>{1, 1});
  const std::vector<std::vector<double>> line{{0, 0}, {2, 0}};
  CHECK(mean_intra_distance(line) == 1.0);
  CHECK_ERROR(centroid(std::vector<std::vector<double>>{}), "EmptyCluster");
  CHECK_ERROR(mean_intra_distance(std::vector<std::vector<double>>{}), "EmptyCluster");
}

TEST_CASE("centroid and mean_intra_distance match direct summation") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::vector<double>> m(10, std::vector<double>(4));
    for (auto& r : m)
      for (auto& x : r) x = rng.uniform(-10, 10);
    std::vector<long double> c(4, 0.0L);
    for (const auto& r : m)
      for (int d = 0; d < 4; ++d) c[d] += r[d];
    for (auto& x : c) x /= 10;
    const auto got = centroid(m);
    for (int d = 0; d < 4; ++d) CHECK(got[d] == doctest::Approx(double(c[d])).epsilon(1e-12));
    long double s = 0;
    for (const auto& r : m) {
      long double q = 0;
      for (int d = 0; d < 4; ++d) q += (r[d] - c[d]) * (r[d] - c[d]);
      s += std::sqrt(q);
    }
    CHECK(mean_intra_distance(m) == doctest::Approx(double(s / 10)).epsilon(1e-12));
  }
}

TEST_CASE("complete_linkage examples") {
  CHECK(complete_linkage(std::vector<double>{1.0}, 1, 1).merges.empty());
  const auto d = complete_linkage(std::vector<double>{0.0, 1.0, 10.0}, 3, 1);
  REQUIRE(d.merges.size() == 2);
  CHECK(d.merges[0] == Merge{0, 1, 1.0, 3});
  CHECK(d.merges[1] == Merge{3, 2, 10.0, 4});
  const auto a = cut(d, CutCriterion::automatic());
  CHECK(a.k == 2);
  CHECK(a.labels == std::vector<int>{0, 0, 1});
}

TEST_CASE("cut examples and errors") {
  Rng rng(2);
  const auto v = random_rows(rng, 9, 3);
  const auto d = complete_linkage(v, 9, 3);
  const auto one = cut(d, CutCriterion::exact(1));
  CHECK(one.k == 1);
  CHECK(std::all_of(one.labels.begin(), one.labels.end(), [](int l) { return l == 0; }));
  const auto all = cut(d, CutCriterion::exact(9));
  CHECK(all.k == 9);
  std::vector<int> iota(9);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(all.labels == iota);
  CHECK_ERROR(cut(d, CutCriterion::exact(0)), "BadK");
  CHECK_ERROR(cut(d, CutCriterion::exact(10)), "BadK");
  CHECK_ERROR(cut(d, CutCriterion::at_distance(-1.0)), "ConfigError");
  // threshold keeps merges at or below it
  for (const auto& m : d.merges) {
    const auto t = cut(d, CutCriterion::at_distance(m.distance));
    const auto kept = std::count_if(d.merges.begin(), d.merges.end(), [&](const Merge& q) { return q.distance <= m.distance; });
    CHECK(t.k == 9 - kept);
  }
  const std::vector<int> ids{2, 5, 7, 8, 11, 12, 20, 21, 40};
  const auto named = cut(d, CutCriterion::exact(3), ids);
  CHECK(named.ids == ids);
  CHECK(named.label_of(40) == named.labels.back());
  CHECK_ERROR(named.label_of(3), "LabelMismatch");
}

TEST_CASE("dendrogram invariants and labels canonical") {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const int n = 2 + int(rng.below(30));
    const auto v = random_rows(rng, n, 3, t % 2 == 0);
    const auto d = complete_linkage(v, n, 3);
    REQUIRE(int(d.merges.size()) == n - 1);
    std::set<int> used;
    for (std::size_t k = 0; k < d.merges.size(); ++k) {
      if (k) CHECK(d.merges[k].distance >= d.merges[k - 1].distance);
      CHECK(d.merges[k].node == n + int(k));
      CHECK(used.insert(d.merges[k].a).second);
      CHECK(used.insert(d.merges[k].b).second);
    }
    for (int k = 1; k <= n; ++k) {
      const auto a = cut(d, CutCriterion::exact(k));
      CHECK(a.k == k);
      int next = 0;
      for (int l : a.labels) {
        CHECK(l <= next);
        if (l == next) ++next;
      }
    }
  }
}

TEST_CASE("complete_linkage agrees with the naive reference, ties included") {
  Rng rng(4);
  for (int t = 0; t < 40; ++t) {
    const int n = 1 + int(rng.below(24)), dim = 1 + int(rng.below(4));
    const auto v = random_rows(rng, n, dim, t % 2 == 1);
    const auto d = complete_linkage(v, n, dim);
    const auto ref = oracle::naive_complete_linkage(v, n, dim);
    REQUIRE(d.merges.size() == ref.distances.size());
    for (std::size_t k = 0; k < ref.distances.size(); ++k)
      CHECK(d.merges[k].distance == doctest::Approx(ref.distances[k]).epsilon(1e-9));
    for (int k = 1; k <= n; ++k) CHECK(partition(cut(d, CutCriterion::exact(k))) == ref.by_k[k]);
  }
}

TEST_CASE("partitions survive row permutation and uniform scaling; cuts nest") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const int n = 3 + int(rng.below(20)), dim = 2;
    const auto v = random_rows(rng, n, dim);
    const auto d = complete_linkage(v, n, dim);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<double> pv(n * dim), scaled(v);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < dim; ++k) pv[i * dim + k] = v[perm[i] * dim + k];
    for (auto& x : scaled) x *= 4.0;
    const auto dp = complete_linkage(pv, n, dim);
    const auto ds = complete_linkage(scaled, n, dim);
    for (std::size_t k = 0; k < d.merges.size(); ++k)
      CHECK(ds.merges[k].distance == doctest::Approx(4.0 * d.merges[k].distance).epsilon(1e-12));
    for (int k = 1; k <= n; ++k) {
      const auto base = partition(cut(d, CutCriterion::exact(k)));
      CHECK(partition(cut(dp, CutCriterion::exact(k)), perm) == base);
      CHECK(partition(cut(ds, CutCriterion::exact(k))) == base);
      if (k < n) {
        // exactly two blocks of the finer partition join
        const auto finer = partition(cut(d, CutCriterion::exact(k + 1)));
        std::set<std::set<int>> gone, added;
        std::set_difference(finer.begin(), finer.end(), base.begin(), base.end(), std::inserter(gone, gone.end()));
        std::set_difference(base.begin(), base.end(), finer.begin(), finer.end(), std::inserter(added, added.end()));
        REQUIRE(gone.size() == 2);
        REQUIRE(added.size() == 1);
        std::set<int> u = *gone.begin();
        u.insert(gone.rbegin()->begin(), gone.rbegin()->end());
        CHECK(u == *added.begin());
      }
    }
  }
}

TEST_CASE("canonicalize numbers labels by first appearance in id order") {
  const auto a = canonicalize({5, 1, 3}, {7, 9, 7});
  CHECK(a.ids == std::vector<int>{1, 3, 5});
  CHECK(a.labels == std::vector<int>{0, 1, 1});
  CHECK(a.k == 2);
}

TEST_CASE("cluster_diagnostics reports per-cluster centroid and spread") {
  tracking::FeatureMatrix f;
  f.dim = 1;
  f.row_ids = {0, 1, 2};
  f.values = {0.0, 2.0, 10.0};
  const auto stats = cluster_diagnostics(f, canonicalize({0, 1, 2}, {0, 0, 1}));
  REQUIRE(stats.size() == 2);
  CHECK(stats[0].size == 2);
  CHECK(stats[0].centroid == std::vector<double>{1.0});
  CHECK(stats[0].intra_distance == 1.0);
  CHECK(stats[1].intra_distance == 0.0);
}
