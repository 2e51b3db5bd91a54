#include <fstream>
#include <set>
#include <sstream>

#include "unit/util.hpp"
#include "wildseg/ingest.hpp"
#include "wildseg/pipeline.hpp"
#include "wildseg/scene.hpp"

using namespace wildseg;
using namespace wildseg::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig scene_config(const fs::path& root, const eval::SceneSpec& spec) {
  eval::write_scene(root / "scene", eval::generate_scene(spec));
  PipelineConfig cfg;
  cfg.frames_dir = root / "scene" / "frames";
  cfg.matte_dir = root / "scene" / "mattes";
  cfg.truth_dir = root / "scene" / "truth";
  cfg.out_dir = root / "run";
  cfg.gate = 3.0;
  cfg.cut = clustering::CutCriterion::exact(2);
  cfg.train.epochs = 10;
  cfg.train.rounds = 2;
  return cfg;
}

}  // namespace

TEST_CASE("propagate copies the nearest clustered trajectory, lower id on ties") {
  tracking::TrajectorySet set;
  set.frame_count = 2;
  set.trajectories.push_back({0, 0, {{0, 0}, {0, 0}}});
  set.trajectories.push_back({1, 0, {{5, 0}, {5, 0}}});  // equidistant from 0 and 2
  set.trajectories.push_back({2, 0, {{10, 0}, {10, 0}}});
  set.trajectories.push_back({3, 0, {{9, 0}, {9, 0}}});
  const auto clustered = clustering::canonicalize({0, 2}, {0, 1});
  const auto all = propagate(set, clustered);
  CHECK(all.ids == std::vector<int>{0, 1, 2, 3});
  CHECK(all.labels == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("mean_bbox_diagonal uses pixel extents") {
  ForegroundMask m(10, 10, 0);
  m.at(2, 2) = m.at(4, 5) = 1;  // 3 x 4 box
  CHECK(mean_bbox_diagonal({m, ForegroundMask(10, 10, 0)}) == 5.0);
}

TEST_CASE("runner precondition errors") {
  PipelineConfig cfg;
  cfg.frames = 0;
  std::ostringstream log;
  CHECK_ERROR(Runner(cfg, false, log), "NeedMoreFrames");

  const auto root = testutil::scratch("pipe_missing");
  PipelineConfig missing;
  missing.frames_dir = root / "nope";
  missing.out_dir = root / "run";
  Runner r(missing, false, log);
  std::string msg;
  try {
    r.run_stage("ingest");
  } catch (const Error& e) {
    msg = e.what();
  }
  CHECK(msg.rfind("MissingStage: ingest", 0) == 0);
  CHECK(msg.find((root / "nope").string()) != std::string::npos);
  CHECK_ERROR(r.run_stage("cluster"), "MissingStage");
  CHECK_ERROR(r.run_stage("bogus"), "ConfigError");

  PipelineConfig no_refine = missing;
  no_refine.refine = false;
  CHECK_ERROR(Runner(no_refine, true, log), "ConfigError");
}

TEST_CASE("edges stage on the square scene follows the perimeter") {
  const auto root = testutil::scratch("pipe_square");
  auto cfg = scene_config(root, eval::square_scene(32, 10, 3));
  std::ostringstream log;
  Runner r(cfg, false, log);
  r.run_stage("ingest");
  r.run_stage("matte");
  r.run_stage("edges");
  std::istringstream csv(slurp(cfg.out_dir / "edges" / "edges.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "frame,x,y");
  int rows = 0;
  while (std::getline(csv, line)) {
    int f, x, y;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%d", &f, &x, &y) == 3);
    const int dx = std::max({11 - x, x - 20, 0}), dy = std::max({11 - y, y - 20, 0});
    CHECK(std::max(dx, dy) <= 1);
    CHECK((x <= 12 || x >= 19 || y <= 12 || y >= 19));
    ++rows;
  }
  CHECK(rows > 3 * 30);
}

TEST_CASE("cached stages: hits, rounds = 0, isolation, determinism") {
  const auto root = testutil::scratch("pipe_cache");
  auto cfg = scene_config(root, eval::two_limb_scene(24, 1));
  std::ostringstream log;
  {
    Runner r(cfg, true, log);
    const auto results = r.run_all();
    REQUIRE(results.size() == stage_names().size());
    for (const auto& s : results) CHECK(!s.cache_hit);
  }
  const auto cluster_bytes = slurp(cfg.out_dir / "cluster" / "assignment.csv");
  const auto tree = tree_hash(cfg.out_dir);
  {
    Runner r(cfg, true, log);
    const auto again = r.run_stage("cluster");
    CHECK(again.cache_hit);
    CHECK(slurp(cfg.out_dir / "cluster" / "assignment.csv") == cluster_bytes);
    for (const auto& s : r.run_all()) CHECK(s.cache_hit);
  }
  CHECK(fs::exists(cfg.out_dir / "eval" / "report.json"));
  CHECK(fs::exists(cfg.out_dir / "eval" / "metrics_unrefined.json"));
  CHECK(fs::exists(cfg.out_dir / "render" / "unrefined"));

  // deleting one stage and re-running reproduces it byte for byte
  fs::remove_all(cfg.out_dir / "cluster");
  {
    Runner r(cfg, true, log);
    CHECK(!r.run_stage("cluster").cache_hit);
  }
  CHECK(slurp(cfg.out_dir / "cluster" / "assignment.csv") == cluster_bytes);
  CHECK(tree_hash(cfg.out_dir) == tree);

  // a config change invalidates downstream stages only
  auto changed = cfg;
  changed.train.epochs = 11;
  {
    Runner r(changed, true, log);
    CHECK(r.run_stage("cluster").cache_hit);
    CHECK(!r.run_stage("refine").cache_hit);
  }

  // refine with rounds = 0 reproduces the plain assignment
  auto zero = cfg;
  zero.train.rounds = 0;
  {
    Runner r(zero, false, log);
    r.run_stage("refine");
  }
  CHECK(slurp(cfg.out_dir / "refine" / "assignment.csv") == cluster_bytes);

  // a second tree from scratch is byte-identical
  auto twin = cfg;
  twin.out_dir = root / "run_twin";
  auto first = cfg;
  first.out_dir = root / "run_first";
  {
    Runner a(first, true, log), b(twin, true, log);
    a.run_all();
    b.run_all();
  }
  CHECK(tree_hash(first.out_dir) == tree_hash(twin.out_dir));
  CHECK(slurp(first.out_dir / "eval" / "report.json") == slurp(twin.out_dir / "eval" / "report.json"));
}

TEST_CASE("refinement separates the two in-phase limbs") {
  const auto scene = eval::generate_scene(eval::two_limb_scene(120, 3));
  FrameSequence masked;
  for (std::size_t t = 0; t < scene.sequence.frames.size(); ++t)
    masked.frames.push_back(ingest::apply_mask(scene.sequence.frames[t], scene.mattes[t]));
  PipelineConfig cfg;
  cfg.cut = clustering::CutCriterion::exact(2);
  const auto a = analyze(masked, scene.mattes, cfg);
  REQUIRE(a.refined);

  const auto& in = a.refined->input;
  const auto truth = eval::trajectory_truth_labels(a.tracks.set, in.features.row_ids, scene.truth);
  auto mean_cross = [&](const contrastive::EmbeddingParams& p) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < in.features.rows(); ++i)
      for (std::size_t j = 0; j < in.features.rows(); ++j)
        if (truth[i] == 0 && truth[j] == 1) {
          sum += contrastive::pair_distance(p, in.features.row(i), in.features.row(j));
          ++n;
        }
    return sum / n;
  };
  const auto init = contrastive::EmbeddingParams::identity(in.features.dim, a.refined->training.params.d_out);
  CHECK(mean_cross(a.refined->training.params) > mean_cross(init));

  // after training, no cluster holds both limbs
  std::set<int> left, right;
  for (std::size_t i = 0; i < in.features.rows(); ++i) {
    if (truth[i] == 0) left.insert(a.refined->clustered.labels[i]);
    if (truth[i] == 1) right.insert(a.refined->clustered.labels[i]);
  }
  CHECK(left.size() == 1);
  CHECK(right.size() == 1);
  CHECK(left != right);
}
