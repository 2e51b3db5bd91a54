#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wildseg/clustering.hpp"
#include "wildseg/tracking.hpp"

namespace wildseg::contrastive {

using clustering::Assignment;
using clustering::CutCriterion;
using tracking::FeatureMatrix;
using tracking::TrajectorySet;

// Affine siamese map x -> W x + b, W row-major d_out x d_in.
struct EmbeddingParams {
  int d_in = 0;
  int d_out = 0;
  std::vector<double> W;
  std::vector<double> b;

  // Identity padded/truncated to d_out x d_in, zero bias.
  static EmbeddingParams identity(int d_in, int d_out);
  double& w(int r, int c) { return W[static_cast<std::size_t>(r) * d_in + c]; }
  double w(int r, int c) const { return W[static_cast<std::size_t>(r) * d_in + c]; }
  friend bool operator==(const EmbeddingParams&, const EmbeddingParams&) = default;
};

struct Gradient {
  std::vector<double> dW;
  std::vector<double> db;
};

// y = 0 similar, y = 1 dissimilar; i, j index feature rows.
struct Pair {
  int i = 0;
  int j = 0;
  int y = 0;
  friend bool operator==(const Pair&, const Pair&) = default;
};
using PairBatch = std::vector<Pair>;

struct TrainConfig {
  double margin = 1.0;
  double learning_rate = 0.01;
  int epochs = 50;
  int batch_size = 64;
  int rounds = 3;
  double r_sim = 0.0;
  double r_dis = 0.0;
  int d_out = 0;  // 0 = feature dimension
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<double> embed(const EmbeddingParams& params, std::span<const double> x);
double pair_distance(const EmbeddingParams& params, std::span<const double> x1, std::span<const double> x2);

// Proximity is the distance between mean image positions. Similar pool:
// proximity <= r_sim; dissimilar pool: proximity >= r_dis. floor(count/2)
// similar and ceil(count/2) dissimilar pairs are drawn with replacement.
struct PairPools {
  std::vector<std::pair<int, int>> similar;     // i < j, ascending
  std::vector<std::pair<int, int>> dissimilar;  // i < j, ascending
};

PairPools pair_pools(std::span<const Vec2> mean_positions, double r_sim, double r_dis);

PairBatch sample_pairs(std::span<const Vec2> mean_positions, double r_sim, double r_dis, int count,
                       std::uint64_t seed);
PairBatch sample_pairs(const TrajectorySet& set, std::span<const int> row_ids, double r_sim, double r_dis, int count,
                       std::uint64_t seed);

// Mean over pairs of (1-y) 1/2 D^2 + y 1/2 max(0, m - D)^2.
double contrastive_loss(const PairBatch& batch, const FeatureMatrix& features, const EmbeddingParams& params,
                        double margin);
Gradient loss_gradient(const PairBatch& batch, const FeatureMatrix& features, const EmbeddingParams& params,
                       double margin);

// params -= lr * grad
void apply_step(EmbeddingParams& params, const Gradient& grad, double lr);

FeatureMatrix embed_features(const EmbeddingParams& params, const FeatureMatrix& features);

// Embed every row, then complete linkage and cut.
Assignment recluster(const EmbeddingParams& params, const FeatureMatrix& features, const CutCriterion& criterion);

struct LogEntry {
  int round = 0;
  int epoch = 0;
  double loss = 0.0;
};

struct RoundDiagnostics {
  int round = 0;
  int k = 0;
  double mean_intra_distance = 0.0;
};

struct TrainResult {
  EmbeddingParams params;
  std::vector<LogEntry> log;
  std::vector<RoundDiagnostics> rounds;
};

// Rounds alternate a re-clustering pass (recorded in `rounds`) with
// cfg.epochs of gradient descent, one freshly sampled batch per epoch.
// Pair proximity uses the mean positions of the feature rows' trajectories.
TrainResult train_embedding(const FeatureMatrix& features, const TrajectorySet& set, const TrainConfig& cfg,
                            const CutCriterion& criterion = CutCriterion::automatic());
TrainResult train_embedding(const FeatureMatrix& features, std::span<const Vec2> mean_positions,
                            const TrainConfig& cfg, const CutCriterion& criterion = CutCriterion::automatic());

}  // namespace wildseg::contrastive
