#include <algorithm>
#include <cmath>
#include <set>

#include "oracles/oracles.hpp"
#include "unit/util.hpp"
#include "wildseg/contrastive.hpp"

using namespace wildseg;
using namespace wildseg::contrastive;

namespace {

FeatureMatrix matrix(int dim, std::vector<double> values) {
  FeatureMatrix f;
  f.dim = dim;
  f.values = std::move(values);
  for (std::size_t r = 0; r < f.values.size() / dim; ++r) f.row_ids.push_back(int(r));
  return f;
}

EmbeddingParams random_params(Rng& rng, int d_in, int d_out) {
  auto p = EmbeddingParams::identity(d_in, d_out);
  for (auto& w : p.W) w = rng.uniform(-1.0, 1.0);
  for (auto& b : p.b) b = rng.uniform(-1.0, 1.0);
  return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_CASE("pair pools and sampling examples") {
  const std::vector<Vec2> close{{0, 0}, {2, 0}};
  const auto pools = pair_pools(close, 5.0, 50.0);
  CHECK(pools.similar == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(pools.dissimilar.empty());
  CHECK_ERROR(sample_pairs(close, 5.0, 50.0, 4, 1), "PoolExhausted");

  const std::vector<Vec2> far{{0, 0}, {100, 0}};
  const auto fp = pair_pools(far, 5.0, 50.0);
  CHECK(fp.similar.empty());
  CHECK(fp.dissimilar == std::vector<std::pair<int, int>>{{0, 1}});

  const std::vector<Vec2> three{{0, 0}, {1, 0}, {60, 0}};
  const auto b = sample_pairs(three, 5.0, 50.0, 5, 9);
  REQUIRE(b.size() == 5);
  CHECK(std::count_if(b.begin(), b.end(), [](const Pair& p) { return p.y == 0; }) == 2);
  for (const auto& p : b) {
    if (p.y == 0) CHECK(p == Pair{0, 1, 0});
    else CHECK(p.j == 2);
  }
  CHECK_ERROR(sample_pairs(std::vector<Vec2>{{0, 0}}, 5.0, 50.0, 4, 1), "PoolExhausted");
  CHECK_ERROR(sample_pairs(three, 50.0, 5.0, 4, 1), "ConfigError");
}

TEST_CASE("sampling is seeded and respects the exclusion band") {
  Rng rng(1);
  std::vector<Vec2> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({rng.uniform(0, 100), rng.uniform(0, 100)});
  const auto a = sample_pairs(pts, 20.0, 60.0, 64, 7);
  CHECK(a == sample_pairs(pts, 20.0, 60.0, 64, 7));
  CHECK(a != sample_pairs(pts, 20.0, 60.0, 64, 8));
  for (const auto& p : a) {
    CHECK(p.i != p.j);
    const double d = tracking::euclidean(pts[p.i], pts[p.j]);
    CHECK((p.y == 0 ? d <= 20.0 : d >= 60.0));
  }
}

TEST_CASE("embed and pair_distance") {
  const auto id = EmbeddingParams::identity(3, 3);
  const std::vector<double> x{1.5, -2.0, 4.0};
  CHECK(embed(id, x) == x);
  auto zero = EmbeddingParams::identity(3, 2);
  std::fill(zero.W.begin(), zero.W.end(), 0.0);
  zero.b = {7.0, -1.0};
  CHECK(embed(zero, x) == zero.b);
  CHECK_ERROR(embed(id, std::vector<double>{1.0}), "DimError");

  const auto id2 = EmbeddingParams::identity(2, 2);
  CHECK(pair_distance(id2, std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 5.0);
  CHECK(pair_distance(id2, std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
  CHECK_ERROR(pair_distance(id2, std::vector<double>{1, 2}, std::vector<double>{1}), "DimError");

  // identity truncates and pads
  const auto t = EmbeddingParams::identity(3, 2);
  CHECK(embed(t, x) == std::vector<double>{1.5, -2.0});
  const auto pad = EmbeddingParams::identity(2, 3);
  CHECK(embed(pad, std::vector<double>{1, 2}) == std::vector<double>{1, 2, 0});

  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const auto p = random_params(rng, 5, 3);
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = rng.uniform(-3, 3);
    for (auto& v : b) v = rng.uniform(-3, 3);
    const auto ea = embed(p, a);
    long double dist = 0;
    std::vector<long double> eb(3);
    for (int r = 0; r < 3; ++r) {
      long double s = p.b[r], s2 = p.b[r];
      for (int c = 0; c < 5; ++c) {
        s += (long double)p.w(r, c) * a[c];
        s2 += (long double)p.w(r, c) * b[c];
      }
      CHECK(ea[r] == doctest::Approx(double(s)).epsilon(1e-12));
      dist += (s - s2) * (s - s2);
    }
    CHECK(pair_distance(p, a, b) == doctest::Approx(double(std::sqrt(dist))).epsilon(1e-12));
  }
}

TEST_CASE("contrastive_loss examples") {
  const auto f = matrix(2, {0, 0, 0, 0, 3, 4});
  const auto id = EmbeddingParams::identity(2, 2);
  CHECK(contrastive_loss({{0, 1, 0}}, f, id, 1.0) == 0.0);
  CHECK(contrastive_loss({{0, 2, 1}}, f, id, 1.0) == 0.0);  // D = 5 >= m
  CHECK(contrastive_loss({{0, 1, 1}}, f, id, 2.0) == 0.5 * 4.0);
  CHECK(contrastive_loss({{0, 2, 0}}, f, id, 1.0) == 12.5);
  CHECK(contrastive_loss({{0, 2, 0}, {0, 1, 1}}, f, id, 2.0) == (12.5 + 2.0) / 2.0);
  CHECK_ERROR(contrastive_loss({}, f, id, 1.0), "EmptyBatch");
}

TEST_CASE("loss is non-negative, zero exactly at the optimum") {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> v(12);
    for (auto& x : v) x = rng.uniform(-2, 2);
    const auto f = matrix(2, v);
    const auto p = random_params(rng, 2, 2);
    PairBatch b;
    for (int i = 0; i < 6; ++i) b.push_back({int(rng.below(6)), int(rng.below(6)), int(rng.below(2))});
    const double loss = contrastive_loss(b, f, p, 1.0);
    CHECK(loss >= 0.0);
    bool optimal = true;
    for (const auto& pr : b) {
      const double d = pair_distance(p, f.row(pr.i), f.row(pr.j));
      if (pr.y == 0 ? d != 0.0 : d < 1.0) optimal = false;
    }
    CHECK((loss == 0.0) == optimal);
  }
}

TEST_CASE("loss_gradient examples") {
  // every pair has zero loss, strictly inside flat regions
  const auto f = matrix(2, {0, 0, 0, 0, 3, 4});
  const auto id = EmbeddingParams::identity(2, 2);
  const auto g = loss_gradient({{0, 1, 0}, {0, 2, 1}}, f, id, 1.0);
  for (double v : g.dW) CHECK(v == 0.0);
  for (double v : g.db) CHECK(v == 0.0);

  // single similar pair at W = I: dL/dW = (x1 - x2)(x1 - x2)^T, dL/db = 0
  const auto h = matrix(2, {1, 2, 4, -2});
  const auto gs = loss_gradient({{0, 1, 0}}, h, id, 1.0);
  const double d[2] = {-3, 4};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) CHECK(gs.dW[r * 2 + c] == d[r] * d[c]);
  CHECK(gs.db == std::vector<double>{0, 0});
  const auto fd = oracle::central_differences({{0, 1, 0}}, h, id, 1.0);
  for (int i = 0; i < 4; ++i) CHECK(rel_err(gs.dW[i], fd.dW[i]) < 1e-6);
}

TEST_CASE("loss_gradient matches central differences away from kinks") {
  Rng rng(4);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int d_in = 2 + int(rng.below(5)), d_out = 1 + int(rng.below(4));
    std::vector<double> v(8 * d_in);
    for (auto& x : v) x = rng.uniform(-1, 1);
    const auto f = matrix(d_in, v);
    const auto p = random_params(rng, d_in, d_out);
    const double margin = 1.5;
    PairBatch b;
    while (b.size() < 6) {
      const Pair pr{int(rng.below(8)), int(rng.below(8)), int(rng.below(2))};
      if (pr.i == pr.j) continue;
      const double dist = pair_distance(p, f.row(pr.i), f.row(pr.j));
      if (dist < 1e-3 || std::abs(dist - margin) < 1e-3) continue;
      b.push_back(pr);
    }
    const auto g = loss_gradient(b, f, p, margin);
    const auto fd = oracle::central_differences(b, f, p, margin);
    for (std::size_t i = 0; i < g.dW.size(); ++i) worst = std::max(worst, rel_err(g.dW[i], fd.dW[i]));
    for (std::size_t i = 0; i < g.db.size(); ++i) worst = std::max(worst, rel_err(g.db[i], fd.db[i]));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("one step moves params by -lr * gradient and, small enough, lowers the loss") {
  const auto f = matrix(2, {1, 2, 4, -2});
  auto p = EmbeddingParams::identity(2, 2);
  const auto g = loss_gradient({{0, 1, 0}}, f, p, 1.0);
  auto q = p;
  apply_step(q, g, 0.01);
  for (int i = 0; i < 4; ++i) CHECK(q.W[i] == p.W[i] - 0.01 * g.dW[i]);

  Rng rng(5);
  for (int k = 0; k < 30; ++k) {
    std::vector<double> v(12);
    for (auto& x : v) x = rng.uniform(-1, 1);
    const auto fm = matrix(3, v);
    const auto params = random_params(rng, 3, 2);
    PairBatch b{{0, 1, int(rng.below(2))}, {2, 3, int(rng.below(2))}, {0, 3, 1}};
    const auto grad = loss_gradient(b, fm, params, 2.0);
    double gn = 0;
    for (double x : grad.dW) gn += x * x;
    if (gn == 0.0) continue;
    const double before = contrastive_loss(b, fm, params, 2.0);
    bool dropped = false;
    for (double lr = 1.0; lr > 1e-12 && !dropped; lr *= 0.5) {
      auto s = params;
      apply_step(s, grad, lr);
      dropped = contrastive_loss(b, fm, s, 2.0) < before;
    }
    CHECK(dropped);
  }
}

TEST_CASE("train_embedding basics") {
  Rng rng(6);
  std::vector<double> v;
  std::vector<Vec2> means;
  for (int i = 0; i < 12; ++i) {
    v.push_back(rng.uniform(-1, 1));
    v.push_back(rng.uniform(-1, 1));
    means.push_back({(i % 2) * 40.0 + rng.uniform(0, 3), rng.uniform(0, 3)});
  }
  const auto f = matrix(2, v);
  TrainConfig cfg;
  cfg.r_sim = 5.0;
  cfg.r_dis = 30.0;
  cfg.rounds = 0;
  const auto none = train_embedding(f, means, cfg);
  CHECK(none.params == EmbeddingParams::identity(2, 2));
  CHECK(none.log.empty());

  cfg.rounds = 2;
  cfg.epochs = 5;
  cfg.seed = 3;
  const auto a = train_embedding(f, means, cfg);
  CHECK(a.log.size() == 10);
  CHECK(a.rounds.size() == 2);
  CHECK(std::isfinite(a.log.back().loss));
  const auto b = train_embedding(f, means, cfg);
  CHECK(a.params == b.params);

  cfg.learning_rate = 1e6;
  cfg.epochs = 50;
  CHECK_ERROR(train_embedding(f, means, cfg), "Diverged");
  cfg.learning_rate = 0.01;
  cfg.r_dis = 1.0;
  CHECK_ERROR(train_embedding(f, means, cfg), "ConfigError");
}

TEST_CASE("recluster is invariant under identity and rotations") {
  Rng rng(7);
  std::vector<double> v;
  for (int i = 0; i < 40; ++i) v.push_back(rng.uniform(-5, 5));
  const auto f = matrix(2, v);
  const auto base = clustering::cut(clustering::complete_linkage(f), CutCriterion::exact(4), f.row_ids);
  CHECK(recluster(EmbeddingParams::identity(2, 2), f, CutCriterion::exact(4)) == base);
  auto rot = EmbeddingParams::identity(2, 2);
  const double a = 0.7;
  rot.W = {std::cos(a), -std::sin(a), std::sin(a), std::cos(a)};
  for (int k = 1; k <= 20; ++k) {
    const auto want = clustering::cut(clustering::complete_linkage(f), CutCriterion::exact(k), f.row_ids);
    CHECK(recluster(rot, f, CutCriterion::exact(k)).labels == want.labels);
  }
}
