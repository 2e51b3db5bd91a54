#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wildseg/clustering.hpp"
#include "wildseg/config.hpp"
#include "wildseg/contrastive.hpp"
#include "wildseg/edges.hpp"
#include "wildseg/eval.hpp"
#include "wildseg/render.hpp"
#include "wildseg/tracking.hpp"

namespace wildseg::pipeline {

using clustering::Assignment;
using config::PipelineConfig;

// ---- in-memory stages -------------------------------------------------------

struct Tracks {
  tracking::TrajectorySet set;
  tracking::Window window;
  tracking::FeatureMatrix features;
};

std::vector<edges::EdgeSet> detect_all(const std::vector<Frame>& masked, const edges::CannyParams& params);

Tracks track(std::span<const edges::EdgeSet> edge_sets, const PipelineConfig& cfg, int width, int height);

// Every trajectory gets a label: clustered ones keep theirs, the others copy
// the clustered trajectory with the nearest mean position (lower id on ties).
Assignment propagate(const tracking::TrajectorySet& set, const Assignment& clustered);

struct ClusterOutput {
  clustering::Dendrogram dendrogram;
  Assignment clustered;  // feature rows only
  Assignment all;        // after propagation
};

ClusterOutput cluster(const Tracks& tracks, const clustering::CutCriterion& criterion);

// Mean over frames with any foreground of the foreground bounding-box diagonal.
double mean_bbox_diagonal(const std::vector<ForegroundMask>& masks);

// Fills r_sim / r_dis (when 0) from the footage, copies the run seed, and
// sets d_out (when 0) to the motion feature dimension.
contrastive::TrainConfig resolve_train(const PipelineConfig& cfg, int width, int height,
                                       const std::vector<ForegroundMask>& masks, int feature_dim);

// Refinement input: each row is [a * motion features, p * mean position].
// a is a power of two so that scaling is exact and the truncated identity
// embedding reproduces the plain clustering bit for bit.
struct RefineInput {
  tracking::FeatureMatrix features;
  std::vector<Vec2> means;
  double motion_scale = 1.0;
  double position_scale = 1.0;
};

RefineInput refine_input(const Tracks& tracks, const contrastive::TrainConfig& train, double motion_gain,
                         double position_gain);

struct RefineOutput {
  RefineInput input;
  contrastive::TrainResult training;
  Assignment clustered;
  Assignment all;
};

RefineOutput refine(const Tracks& tracks, const contrastive::TrainConfig& train, const PipelineConfig& cfg);

std::vector<render::PartSegmentation> segment(const std::vector<edges::EdgeSet>& edge_sets,
                                              const tracking::TrajectorySet& set, const Assignment& all, int width,
                                              int height);

// ARI over clustered trajectories with a truth label (when truth is given),
// mean log-likelihood of the motion features, AP over frames (when truth is
// given), cluster diagnostics.
eval::MetricsReport evaluate(const Tracks& tracks, const Assignment& clustered,
                             const std::vector<render::PartSegmentation>& segs,
                             const std::vector<LabelGrid>* truth, const PipelineConfig& cfg);

struct Analysis {
  std::vector<edges::EdgeSet> edges;
  Tracks tracks;
  ClusterOutput plain;
  std::optional<RefineOutput> refined;
};

// ingest-free core: frames must already be masked.
Analysis analyze(const FrameSequence& masked, const std::vector<ForegroundMask>& masks, const PipelineConfig& cfg);

// ---- cached stages ----------------------------------------------------------

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest", "matte", "edges", "track", "cluster", "refine", "render",
                                              "eval"};
  return names;
}

struct StageResult {
  std::string stage;
  bool cache_hit = false;
  std::string summary;
};

class Runner {
 public:
  Runner(PipelineConfig cfg, bool compare_contrastive, std::ostream& log);

  StageResult run_stage(const std::string& stage);
  // All stages in order; refine is skipped when disabled.
  std::vector<StageResult> run_all();

 private:
  std::filesystem::path dir(const std::string& stage) const;
  std::string stage_key(const std::string& stage) const;
  std::optional<std::string> upstream_output(const std::string& stage) const;

  StageResult ingest();
  StageResult matte();
  StageResult edges();
  StageResult track();
  StageResult cluster();
  StageResult refine();
  StageResult render();
  StageResult eval();

  PipelineConfig cfg_;
  bool compare_;
  std::ostream& log_;
};

// SHA-256 hex digest of a byte string.
std::string sha256_hex(const std::string& bytes);

// Hash of every regular file under dir (relative path + contents, sorted by
// path), excluding stamp.json.
std::string tree_hash(const std::filesystem::path& dir);

}  // namespace wildseg::pipeline
