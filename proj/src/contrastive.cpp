#include "wildseg/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "wildseg/rng.hpp"

namespace wildseg::contrastive {

EmbeddingParams EmbeddingParams::identity(int d_in, int d_out) {
  if (d_in < 1 || d_out < 1) fail("DimError", "embedding dims must be >= 1");
  EmbeddingParams p;
  p.d_in = d_in;
  p.d_out = d_out;
  p.W.assign(static_cast<std::size_t>(d_in) * d_out, 0.0);
  p.b.assign(d_out, 0.0);
  for (int r = 0; r < std::min(d_in, d_out); ++r) p.w(r, r) = 1.0;
  return p;
}

void TrainConfig::validate() const {
  if (!(margin > 0.0)) fail("ConfigError", "contrastive.margin must be > 0");
  if (!(learning_rate > 0.0)) fail("ConfigError", "contrastive.learning_rate must be > 0");
  if (epochs < 0) fail("ConfigError", "contrastive.epochs must be >= 0");
  if (rounds < 0) fail("ConfigError", "contrastive.rounds must be >= 0");
  if (batch_size < 1) fail("ConfigError", "contrastive.batch_size must be >= 1");
  if (d_out < 0) fail("ConfigError", "contrastive.d_out must be >= 0");
  if (!(r_sim > 0.0 && r_sim < r_dis)) fail("ConfigError", "contrastive radii need 0 < r_sim < r_dis");
}

namespace {

void check_dim(const EmbeddingParams& p, std::size_t n) {
  if (static_cast<int>(n) != p.d_in) {
    fail("DimError", "vector of dim " + std::to_string(n) + " for d_in " + std::to_string(p.d_in));
  }
}

// e = W (x1 - x2); the bias cancels in every pair difference.
void embedded_difference(const EmbeddingParams& p, std::span<const double> diff, std::vector<double>& e) {
  e.assign(p.d_out, 0.0);
  for (int r = 0; r < p.d_out; ++r) {
    const double* row = p.W.data() + static_cast<std::size_t>(r) * p.d_in;
    double acc = 0.0;
    for (int c = 0; c < p.d_in; ++c) acc += row[c] * diff[c];
    e[r] = acc;
  }
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_batch(const PairBatch& batch, const FeatureMatrix& features, const EmbeddingParams& params) {
  if (batch.empty()) fail("EmptyBatch");
  check_dim(params, static_cast<std::size_t>(features.dim));
  const int rows = static_cast<int>(features.rows());
  for (const auto& pr : batch) {
    if (pr.i < 0 || pr.j < 0 || pr.i >= rows || pr.j >= rows) fail("DimError", "pair index out of range");
  }
}

}  // namespace

std::vector<double> embed(const EmbeddingParams& params, std::span<const double> x) {
  check_dim(params, x.size());
  std::vector<double> out(params.b);
  for (int r = 0; r < params.d_out; ++r) {
    const double* row = params.W.data() + static_cast<std::size_t>(r) * params.d_in;
    double acc = 0.0;
    for (int c = 0; c < params.d_in; ++c) acc += row[c] * x[c];
    out[r] += acc;
  }
  return out;
}

double pair_distance(const EmbeddingParams& params, std::span<const double> x1, std::span<const double> x2) {
  if (x1.size() != x2.size()) fail("DimError", "pair members differ in dimension");
  const auto e1 = embed(params, x1);
  const auto e2 = embed(params, x2);
  double s = 0.0;
  for (int r = 0; r < params.d_out; ++r) s += (e1[r] - e2[r]) * (e1[r] - e2[r]);
  return std::sqrt(s);
}

PairPools pair_pools(std::span<const Vec2> mean_positions, double r_sim, double r_dis) {
  if (!(r_sim < r_dis)) fail("ConfigError", "r_sim must be < r_dis");
  PairPools pools;
  const int n = static_cast<int>(mean_positions.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = tracking::euclidean(mean_positions[i], mean_positions[j]);
      if (d <= r_sim) {
        pools.similar.emplace_back(i, j);
      } else if (d >= r_dis) {
        pools.dissimilar.emplace_back(i, j);
      }
    }
  }
  return pools;
}

PairBatch sample_pairs(std::span<const Vec2> mean_positions, double r_sim, double r_dis, int count,
                       std::uint64_t seed) {
  if (mean_positions.size() < 2) fail("PoolExhausted", "need >= 2 trajectories");
  if (count < 1) fail("ConfigError", "pair count must be >= 1");
  const auto [similar, dissimilar] = pair_pools(mean_positions, r_sim, r_dis);
  if (similar.empty()) fail("PoolExhausted", "similar");
  if (dissimilar.empty()) fail("PoolExhausted", "dissimilar");

  Rng rng(seed);
  PairBatch batch;
  batch.reserve(count);
  for (int s = 0; s < count / 2; ++s) {
    const auto& [i, j] = similar[rng.below(similar.size())];
    batch.push_back({i, j, 0});
  }
  for (int s = 0; s < count - count / 2; ++s) {
    const auto& [i, j] = dissimilar[rng.below(dissimilar.size())];
    batch.push_back({i, j, 1});
  }
  return batch;
}

PairBatch sample_pairs(const TrajectorySet& set, std::span<const int> row_ids, double r_sim, double r_dis, int count,
                       std::uint64_t seed) {
  std::vector<Vec2> means;
  means.reserve(row_ids.size());
  for (int id : row_ids) means.push_back(set.by_id(id).mean_position());
  return sample_pairs(means, r_sim, r_dis, count, seed);
}

double contrastive_loss(const PairBatch& batch, const FeatureMatrix& features, const EmbeddingParams& params,
                        double margin) {
  check_batch(batch, features, params);
  std::vector<double> diff(features.dim), e;
  double total = 0.0;
  for (const auto& pr : batch) {
    const auto a = features.row(pr.i), b = features.row(pr.j);
    for (int c = 0; c < features.dim; ++c) diff[c] = a[c] - b[c];
    embedded_difference(params, diff, e);
    const double d = norm(e);
    if (pr.y == 0) {
      total += 0.5 * d * d;
    } else {
      const double h = std::max(0.0, margin - d);
      total += 0.5 * h * h;
    }
  }
  return total / static_cast<double>(batch.size());
}

Gradient loss_gradient(const PairBatch& batch, const FeatureMatrix& features, const EmbeddingParams& params,
                       double margin) {
  check_batch(batch, features, params);
  Gradient g;
  g.dW.assign(params.W.size(), 0.0);
  g.db.assign(params.d_out, 0.0);
  std::vector<double> diff(features.dim), e;
  const double scale = 1.0 / static_cast<double>(batch.size());

  for (const auto& pr : batch) {
    const auto a = features.row(pr.i), b = features.row(pr.j);
    for (int c = 0; c < features.dim; ++c) diff[c] = a[c] - b[c];
    embedded_difference(params, diff, e);
    // dL/dW = coef * e diff^T, with coef = 1 for similar pairs and
    // -(m - D) / D for dissimilar pairs inside the margin.
    double coef = 0.0;
    if (pr.y == 0) {
      coef = 1.0;
    } else {
      const double d = norm(e);
      if (d > 0.0 && d < margin) coef = -(margin - d) / d;
    }
    if (coef == 0.0) continue;
    coef *= scale;
    for (int r = 0; r < params.d_out; ++r) {
      const double er = coef * e[r];
      double* grow = g.dW.data() + static_cast<std::size_t>(r) * params.d_in;
      for (int c = 0; c < params.d_in; ++c) grow[c] += er * diff[c];
    }
  }
  return g;
}

void apply_step(EmbeddingParams& params, const Gradient& grad, double lr) {
  for (std::size_t i = 0; i < params.W.size(); ++i) params.W[i] -= lr * grad.dW[i];
  for (std::size_t i = 0; i < params.b.size(); ++i) params.b[i] -= lr * grad.db[i];
}

FeatureMatrix embed_features(const EmbeddingParams& params, const FeatureMatrix& features) {
  check_dim(params, static_cast<std::size_t>(features.dim));
  FeatureMatrix out;
  out.mode = features.mode;
  out.dim = params.d_out;
  out.row_ids = features.row_ids;
  out.excluded_ids = features.excluded_ids;
  out.values.reserve(features.rows() * params.d_out);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto e = embed(params, features.row(r));
    out.values.insert(out.values.end(), e.begin(), e.end());
  }
  return out;
}

Assignment recluster(const EmbeddingParams& params, const FeatureMatrix& features, const CutCriterion& criterion) {
  const FeatureMatrix embedded = embed_features(params, features);
  return clustering::cut(clustering::complete_linkage(embedded), criterion, embedded.row_ids);
}

TrainResult train_embedding(const FeatureMatrix& features, const TrajectorySet& set, const TrainConfig& cfg,
                            const CutCriterion& criterion) {
  std::vector<Vec2> means;
  means.reserve(features.rows());
  for (int id : features.row_ids) means.push_back(set.by_id(id).mean_position());
  return train_embedding(features, means, cfg, criterion);
}

TrainResult train_embedding(const FeatureMatrix& features, std::span<const Vec2> mean_positions,
                            const TrainConfig& cfg, const CutCriterion& criterion) {
  cfg.validate();
  if (mean_positions.size() != features.rows()) fail("DimError", "one mean position per feature row");
  TrainResult result;
  result.params = EmbeddingParams::identity(features.dim, cfg.d_out > 0 ? cfg.d_out : features.dim);
  auto& params = result.params;

  for (int round = 0; round < cfg.rounds; ++round) {
    {
      const FeatureMatrix embedded = embed_features(params, features);
      const Assignment a = clustering::cut(clustering::complete_linkage(embedded), criterion, embedded.row_ids);
      const auto stats = clustering::cluster_diagnostics(embedded, a);
      double intra = 0.0;
      for (const auto& s : stats) intra += s.intra_distance * s.size;
      result.rounds.push_back({round, a.k, intra / static_cast<double>(embedded.rows())});
    }
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const PairBatch batch = sample_pairs(mean_positions, cfg.r_sim, cfg.r_dis, cfg.batch_size,
                                           mix_seed(cfg.seed, static_cast<std::uint64_t>(round),
                                                    static_cast<std::uint64_t>(epoch)));
      const double loss = contrastive_loss(batch, features, params, cfg.margin);
      if (!std::isfinite(loss)) {
        fail("Diverged", "round " + std::to_string(round) + ", epoch " + std::to_string(epoch));
      }
      apply_step(params, loss_gradient(batch, features, params, cfg.margin), cfg.learning_rate);
      result.log.push_back({round, epoch, loss});
    }
  }
  for (double v : params.W) {
    if (!std::isfinite(v)) fail("Diverged", "non-finite parameters after training");
  }
  return result;
}

}  // namespace wildseg::contrastive
