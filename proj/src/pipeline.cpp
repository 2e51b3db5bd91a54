#include "wildseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "wildseg/ingest.hpp"
#include "wildseg/png_io.hpp"

namespace wildseg::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---- in-memory stages -------------------------------------------------------

std::vector<edges::EdgeSet> detect_all(const std::vector<Frame>& masked, const edges::CannyParams& params) {
  std::vector<edges::EdgeSet> out;
  out.reserve(masked.size());
  for (std::size_t i = 0; i < masked.size(); ++i) {
    out.push_back(edges::detect_edges(masked[i], params, static_cast<int>(i)));
  }
  return out;
}

Tracks track(std::span<const edges::EdgeSet> edge_sets, const PipelineConfig& cfg, int width, int height) {
  Tracks t;
  const double gate = cfg.gate > 0.0 ? cfg.gate : tracking::default_gate(width, height);
  t.set = tracking::build_trajectories(edge_sets, gate, cfg.min_length);
  t.window = tracking::select_window(t.set, cfg.min_coverage, cfg.min_window);
  t.features = tracking::to_feature_matrix(t.set, cfg.feature_mode, t.window);
  return t;
}

Assignment propagate(const tracking::TrajectorySet& set, const Assignment& clustered) {
  if (clustered.ids.empty()) fail("EmptyFeatureMatrix", "nothing to propagate from");
  std::vector<Vec2> anchor;
  anchor.reserve(clustered.ids.size());
  for (int id : clustered.ids) anchor.push_back(set.by_id(id).mean_position());

  std::vector<int> ids, labels;
  std::size_t c = 0;
  for (const auto& tr : set.trajectories) {
    while (c < clustered.ids.size() && clustered.ids[c] < tr.id) ++c;
    ids.push_back(tr.id);
    if (c < clustered.ids.size() && clustered.ids[c] == tr.id) {
      labels.push_back(clustered.labels[c]);
      continue;
    }
    const Vec2 m = tr.mean_position();
    std::size_t best = 0;
    double best_d = tracking::euclidean(m, anchor[0]);
    for (std::size_t i = 1; i < anchor.size(); ++i) {
      const double d = tracking::euclidean(m, anchor[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    labels.push_back(clustered.labels[best]);
  }
  return clustering::canonicalize(std::move(ids), std::move(labels));
}

ClusterOutput cluster(const Tracks& tracks, const clustering::CutCriterion& criterion) {
  ClusterOutput out;
  out.dendrogram = clustering::complete_linkage(tracks.features);
  out.clustered = clustering::cut(out.dendrogram, criterion, tracks.features.row_ids);
  out.all = propagate(tracks.set, out.clustered);
  return out;
}

double mean_bbox_diagonal(const std::vector<ForegroundMask>& masks) {
  double sum = 0.0;
  int frames = 0;
  for (const auto& m : masks) {
    int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        if (!m.at(x, y)) continue;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
    if (x1 < 0) continue;
    sum += std::hypot(x1 - x0 + 1.0, y1 - y0 + 1.0);
    ++frames;
  }
  return frames == 0 ? 0.0 : sum / frames;
}

contrastive::TrainConfig resolve_train(const PipelineConfig& cfg, int width, int height,
                                       const std::vector<ForegroundMask>& masks, int feature_dim) {
  contrastive::TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  if (t.r_sim == 0.0) t.r_sim = cfg.r_sim_frac * std::hypot(width, height);
  if (t.r_dis == 0.0) t.r_dis = cfg.r_dis_frac * mean_bbox_diagonal(masks);
  if (!(t.r_dis > t.r_sim)) {
    fail("ConfigError", "refine.r_dis (" + std::to_string(t.r_dis) + ") must exceed refine.r_sim (" +
                            std::to_string(t.r_sim) + ")");
  }
  if (t.d_out == 0) t.d_out = feature_dim;
  return t;
}

namespace {

double median_pairwise_distance(const tracking::FeatureMatrix& f) {
  std::vector<double> d;
  d.reserve(f.rows() * (f.rows() - 1) / 2);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t j = i + 1; j < f.rows(); ++j) d.push_back(clustering::row_distance(f.row(i), f.row(j)));
  }
  if (d.empty()) return 0.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

}  // namespace

RefineInput refine_input(const Tracks& tracks, const contrastive::TrainConfig& train, double motion_gain,
                         double position_gain) {
  const auto& f = tracks.features;
  RefineInput in;
  double med = median_pairwise_distance(f);
  if (!(med > 0.0)) med = 1.0;
  in.motion_scale = std::exp2(std::round(std::log2(motion_gain * train.margin / med)));
  in.position_scale = position_gain * train.margin / train.r_dis;

  in.features.mode = f.mode;
  in.features.dim = f.dim + 2;
  in.features.row_ids = f.row_ids;
  in.features.excluded_ids = f.excluded_ids;
  in.features.values.reserve(f.rows() * in.features.dim);
  for (std::size_t r = 0; r < f.rows(); ++r) {
    const Vec2 m = tracks.set.by_id(f.row_ids[r]).mean_position();
    in.means.push_back(m);
    for (double v : f.row(r)) in.features.values.push_back(in.motion_scale * v);
    in.features.values.push_back(in.position_scale * m.x);
    in.features.values.push_back(in.position_scale * m.y);
  }
  return in;
}

RefineOutput refine(const Tracks& tracks, const contrastive::TrainConfig& train, const PipelineConfig& cfg) {
  RefineOutput out;
  out.input = refine_input(tracks, train, cfg.motion_gain, cfg.position_gain);
  auto criterion = cfg.cut;
  if (criterion.kind == clustering::CutCriterion::Kind::Threshold) criterion.threshold *= out.input.motion_scale;
  out.training = contrastive::train_embedding(out.input.features, out.input.means, train, criterion);
  out.clustered = contrastive::recluster(out.training.params, out.input.features, criterion);
  out.all = propagate(tracks.set, out.clustered);
  return out;
}

std::vector<render::PartSegmentation> segment(const std::vector<edges::EdgeSet>& edge_sets,
                                              const tracking::TrajectorySet& set, const Assignment& all, int width,
                                              int height) {
  std::vector<render::PartSegmentation> segs;
  segs.reserve(edge_sets.size());
  for (std::size_t f = 0; f < edge_sets.size(); ++f) {
    const int fi = static_cast<int>(f);
    segs.push_back(render::fill_between(render::rasterize_assignment(edge_sets[f], set, all, fi, width, height), fi));
  }
  return segs;
}

eval::MetricsReport evaluate(const Tracks& tracks, const Assignment& clustered,
                             const std::vector<render::PartSegmentation>& segs,
                             const std::vector<LabelGrid>* truth, const PipelineConfig& cfg) {
  eval::MetricsReport report;
  report.k = clustered.k;
  report.mean_ll = eval::mean_log_likelihood(tracks.features, clustered, cfg.var_floor);
  report.clusters = clustering::cluster_diagnostics(tracks.features, clustered);
  if (truth) {
    const auto truth_labels = eval::trajectory_truth_labels(tracks.set, clustered.ids, *truth);
    std::vector<int> ids, pred, gt;
    for (std::size_t i = 0; i < clustered.ids.size(); ++i) {
      if (truth_labels[i] < 0) continue;
      ids.push_back(clustered.ids[i]);
      pred.push_back(clustered.labels[i]);
      gt.push_back(truth_labels[i]);
    }
    if (!ids.empty()) {
      report.ari = eval::adjusted_rand_index(clustering::canonicalize(ids, pred), clustering::canonicalize(ids, gt));
    }
    report.ap = eval::part_average_precision(segs, *truth, cfg.iou_threshold);
  }
  return report;
}

Analysis analyze(const FrameSequence& masked, const std::vector<ForegroundMask>& masks, const PipelineConfig& cfg) {
  if (masked.frames.empty()) fail("NoFrames");
  const int w = masked.frames.front().width, h = masked.frames.front().height;
  Analysis a;
  a.edges = detect_all(masked.frames, cfg.canny);
  a.tracks = track(a.edges, cfg, w, h);
  a.plain = cluster(a.tracks, cfg.cut);
  if (cfg.refine) {
    const auto train = resolve_train(cfg, w, h, masks, a.tracks.features.dim);
    a.refined = refine(a.tracks, train, cfg);
  }
  return a;
}

// ---- hashing ----------------------------------------------------------------

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    fail("IoError", "sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail("IoError", "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail("IoError", "cannot write " + p.string());
  out << text;
}

std::string files_hash(const std::vector<fs::path>& files) {
  std::string acc;
  for (const auto& f : files) acc += f.filename().string() + "\n" + sha256_hex(read_file(f)) + "\n";
  return sha256_hex(acc);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05zu.png", prefix, i);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// ---- cache formats ----------------------------------------------------------

struct Manifest {
  int frames = 0;
  int source_frames = 0;
  int width = 0;
  int height = 0;
  double frame_rate = 25.0;
};

Manifest read_manifest(const fs::path& dir) {
  const auto j = json::parse(read_file(dir / "manifest.json"));
  return {j.at("frames").get<int>(), j.at("source_frames").get<int>(), j.at("width").get<int>(),
          j.at("height").get<int>(), j.at("frame_rate").get<double>()};
}

std::string edges_csv(const std::vector<edges::EdgeSet>& sets) {
  std::string s = "frame,x,y\n";
  for (const auto& e : sets) {
    for (const auto& p : e.points) s += std::to_string(e.frame_index) + "," + std::to_string(p.x) + "," +
                                        std::to_string(p.y) + "\n";
  }
  return s;
}

std::vector<edges::EdgeSet> read_edges_csv(const fs::path& p, int frames) {
  std::vector<edges::EdgeSet> sets(frames);
  for (int f = 0; f < frames; ++f) sets[f].frame_index = f;
  const auto lines = lines_of(p);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split(lines[i]);
    const int f = std::stoi(c.at(0));
    if (f < 0 || f >= frames) fail("BadFrame", "edge row for frame " + c[0]);
    sets[f].points.push_back({std::stoi(c.at(1)), std::stoi(c.at(2))});
  }
  for (auto& s : sets) std::sort(s.points.begin(), s.points.end());
  return sets;
}

std::string trajectories_csv(const tracking::TrajectorySet& set) {
  std::string s = "id,start_frame,x0,y0,x1,y1,...\n";
  for (const auto& tr : set.trajectories) {
    s += std::to_string(tr.id) + "," + std::to_string(tr.start_frame);
    for (const auto& p : tr.positions) s += "," + std::to_string(p.x) + "," + std::to_string(p.y);
    s += "\n";
  }
  return s;
}

tracking::TrajectorySet read_trajectories_csv(const fs::path& p, int frames) {
  tracking::TrajectorySet set;
  set.frame_count = frames;
  const auto lines = lines_of(p);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split(lines[i]);
    tracking::Trajectory tr;
    tr.id = std::stoi(c.at(0));
    tr.start_frame = std::stoi(c.at(1));
    for (std::size_t k = 2; k + 1 < c.size(); k += 2) tr.positions.push_back({std::stoi(c[k]), std::stoi(c[k + 1])});
    set.trajectories.push_back(std::move(tr));
  }
  return set;
}

std::string features_csv(const tracking::FeatureMatrix& f) {
  std::string s = "mode,dim\n" + tracking::to_string(f.mode) + "," + std::to_string(f.dim) + "\n";
  for (std::size_t r = 0; r < f.rows(); ++r) {
    s += std::to_string(f.row_ids[r]);
    for (double v : f.row(r)) s += "," + num(v);
    s += "\n";
  }
  return s;
}

tracking::FeatureMatrix read_features_csv(const fs::path& p, const tracking::TrajectorySet& set) {
  const auto lines = lines_of(p);
  if (lines.size() < 2) fail("IoError", "truncated " + p.string());
  tracking::FeatureMatrix f;
  const auto head = split(lines[1]);
  f.mode = tracking::parse_feature_mode(head.at(0));
  f.dim = std::stoi(head.at(1));
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto c = split(lines[i]);
    if (static_cast<int>(c.size()) != f.dim + 1) fail("IoError", "bad feature row in " + p.string());
    f.row_ids.push_back(std::stoi(c[0]));
    for (std::size_t k = 1; k < c.size(); ++k) f.values.push_back(std::strtod(c[k].c_str(), nullptr));
  }
  std::size_t r = 0;
  for (const auto& tr : set.trajectories) {
    if (r < f.row_ids.size() && f.row_ids[r] == tr.id) {
      ++r;
    } else {
      f.excluded_ids.push_back(tr.id);
    }
  }
  return f;
}

std::string assignment_csv(const Assignment& a) {
  std::string s = "trajectory_id,label\n";
  for (std::size_t i = 0; i < a.ids.size(); ++i) s += std::to_string(a.ids[i]) + "," + std::to_string(a.labels[i]) + "\n";
  return s;
}

Assignment read_assignment_csv(const fs::path& p) {
  std::vector<int> ids, labels;
  const auto lines = lines_of(p);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split(lines[i]);
    ids.push_back(std::stoi(c.at(0)));
    labels.push_back(std::stoi(c.at(1)));
  }
  return clustering::canonicalize(std::move(ids), std::move(labels));
}

Assignment restrict_to(const Assignment& all, const std::vector<int>& ids) {
  std::vector<int> labels;
  labels.reserve(ids.size());
  for (int id : ids) labels.push_back(all.label_of(id));
  return clustering::canonicalize(ids, std::move(labels));
}

Tracks read_tracks(const fs::path& dir) {
  const auto w = json::parse(read_file(dir / "window.json"));
  Tracks t;
  t.set = read_trajectories_csv(dir / "trajectories.csv", w.at("frame_count").get<int>());
  t.window = {w.at("start_frame").get<int>(), w.at("length").get<int>()};
  t.features = read_features_csv(dir / "features.csv", t.set);
  return t;
}

std::vector<ForegroundMask> read_masks(const fs::path& dir, int frames) {
  std::vector<ForegroundMask> masks;
  for (int f = 0; f < frames; ++f) masks.push_back(ingest::load_matte(dir / numbered("mask", f), 128));
  return masks;
}

std::vector<Frame> read_frames(const fs::path& dir, int frames) {
  std::vector<Frame> out;
  for (int f = 0; f < frames; ++f) out.push_back(png::read_rgb(dir / numbered("frame", f)));
  return out;
}

void fresh_dir(const fs::path& d) {
  fs::remove_all(d);
  fs::create_directories(d);
}

json report_json(const eval::MetricsReport& r) { return json::parse(eval::to_json(r)); }

}  // namespace

std::string tree_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "stamp.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += fs::relative(f, dir).generic_string() + "\n" + sha256_hex(read_file(f)) + "\n";
  return sha256_hex(acc);
}

// ---- cached runner ----------------------------------------------------------

Runner::Runner(PipelineConfig cfg, bool compare_contrastive, std::ostream& log)
    : cfg_(std::move(cfg)), compare_(compare_contrastive), log_(log) {
  cfg_.validate();
  if (cfg_.frames && *cfg_.frames == 0) fail("NeedMoreFrames", "--frames 0 leaves nothing to process");
  if (compare_ && !cfg_.refine) fail("ConfigError", "refine.enabled (needed by --compare-contrastive)");
}

fs::path Runner::dir(const std::string& stage) const { return cfg_.out_dir / stage; }

std::optional<std::string> Runner::upstream_output(const std::string& stage) const {
  const auto stamp = dir(stage) / "stamp.json";
  if (!fs::exists(stamp)) return std::nullopt;
  return json::parse(read_file(stamp)).at("output").get<std::string>();
}

namespace {

const std::vector<std::string>& upstream_of(const std::string& stage, bool refine) {
  static const std::map<std::string, std::vector<std::string>> with_refine{
      {"ingest", {}},
      {"matte", {"ingest"}},
      {"edges", {"ingest", "matte"}},
      {"track", {"ingest", "edges"}},
      {"cluster", {"ingest", "track"}},
      {"refine", {"ingest", "matte", "track", "cluster"}},
      {"render", {"ingest", "matte", "edges", "track", "cluster", "refine"}},
      {"eval", {"ingest", "track", "cluster", "refine", "render"}},
  };
  static const std::map<std::string, std::vector<std::string>> without_refine{
      {"render", {"ingest", "matte", "edges", "track", "cluster"}},
      {"eval", {"ingest", "track", "cluster", "render"}},
  };
  if (!refine) {
    auto it = without_refine.find(stage);
    if (it != without_refine.end()) return it->second;
  }
  return with_refine.at(stage);
}

std::vector<std::string> config_keys(const std::string& stage) {
  if (stage == "ingest") return {"input.frames_dir", "input.pattern", "input.frame_rate", "run.frames"};
  if (stage == "matte") {
    return {"input.matte_dir", "input.matte_pattern", "input.matte_threshold", "input.tau_bg", "input.min_blob"};
  }
  if (stage == "edges") return {"edges.sigma", "edges.low", "edges.high", "edges.high_percentile", "edges.low_ratio"};
  if (stage == "track") {
    return {"track.gate", "track.min_length", "track.min_coverage", "track.min_window", "track.feature_mode"};
  }
  if (stage == "cluster") return {"cluster.cut", "cluster.k", "cluster.threshold"};
  if (stage == "refine") {
    return {"cluster.cut",          "cluster.k",          "cluster.threshold",      "run.seed",
            "refine.margin",        "refine.learning_rate", "refine.epochs",        "refine.batch_size",
            "refine.rounds",        "refine.r_sim",       "refine.r_dis",           "refine.d_out",
            "refine.r_sim_frac",    "refine.r_dis_frac",  "refine.position_gain",   "refine.motion_gain"};
  }
  if (stage == "render") return {"render.alpha", "render.palette_size", "refine.enabled"};
  return {"eval.var_floor", "eval.iou_threshold", "input.truth_dir", "refine.enabled"};
}

}  // namespace

std::string Runner::stage_key(const std::string& stage) const {
  std::string acc = "stage=" + stage + "\n";
  const auto canon = config::canonical(cfg_);
  for (const auto& k : config_keys(stage)) acc += k + "=" + canon.at(k) + "\n";
  if (stage == "render" || stage == "eval") acc += std::string("compare=") + (compare_ ? "1" : "0") + "\n";
  for (const auto& up : upstream_of(stage, cfg_.refine)) {
    const auto h = upstream_output(up);
    if (!h) fail("MissingStage", up + " (needed by " + stage + ")");
    acc += up + "=" + *h + "\n";
  }
  if (stage == "ingest") {
    if (!fs::is_directory(cfg_.frames_dir)) fail("MissingStage", "ingest: no frame directory " + cfg_.frames_dir.string());
    auto files = ingest::list_numbered(cfg_.frames_dir, cfg_.pattern);
    if (cfg_.frames && static_cast<std::size_t>(*cfg_.frames) < files.size()) files.resize(*cfg_.frames);
    acc += "count=" + std::to_string(ingest::list_numbered(cfg_.frames_dir, cfg_.pattern).size()) + "\n";
    acc += "files=" + files_hash(files) + "\n";
  }
  if (stage == "matte" && !cfg_.matte_dir.empty()) {
    if (!fs::is_directory(cfg_.matte_dir)) fail("MissingStage", "matte: no matte directory " + cfg_.matte_dir.string());
    acc += "files=" + files_hash(ingest::list_numbered(cfg_.matte_dir, cfg_.matte_pattern)) + "\n";
  }
  if (stage == "eval" && !cfg_.truth_dir.empty()) {
    if (!fs::is_directory(cfg_.truth_dir)) fail("MissingStage", "eval: no truth directory " + cfg_.truth_dir.string());
    acc += "truth=" + files_hash(ingest::list_numbered(cfg_.truth_dir, cfg_.pattern)) + "\n";
  }
  return sha256_hex(acc);
}

StageResult Runner::run_stage(const std::string& stage) {
  if (std::find(stage_names().begin(), stage_names().end(), stage) == stage_names().end()) {
    fail("ConfigError", "unknown stage '" + stage + "'");
  }
  if (stage == "refine" && !cfg_.refine) fail("ConfigError", "refine.enabled is false");
  const std::string key = stage_key(stage);
  const auto stamp = dir(stage) / "stamp.json";
  if (fs::exists(stamp)) {
    const auto j = json::parse(read_file(stamp));
    if (j.at("key").get<std::string>() == key && j.at("output").get<std::string>() == tree_hash(dir(stage))) {
      StageResult r{stage, true, "cache hit"};
      log_ << stage << ": cache hit\n";
      return r;
    }
  }
  fresh_dir(dir(stage));
  StageResult r;
  try {
    if (stage == "ingest") r = ingest();
    else if (stage == "matte") r = matte();
    else if (stage == "edges") r = edges();
    else if (stage == "track") r = track();
    else if (stage == "cluster") r = cluster();
    else if (stage == "refine") r = refine();
    else if (stage == "render") r = render();
    else r = eval();
  } catch (...) {
    fs::remove_all(dir(stage));
    throw;
  }
  json j;
  j["stage"] = stage;
  j["key"] = key;
  j["output"] = tree_hash(dir(stage));
  write_file(stamp, j.dump(2) + "\n");
  r.stage = stage;
  log_ << stage << ": " << r.summary << "\n";
  return r;
}

std::vector<StageResult> Runner::run_all() {
  std::vector<StageResult> out;
  for (const auto& s : stage_names()) {
    if (s == "refine" && !cfg_.refine) continue;
    out.push_back(run_stage(s));
  }
  return out;
}

StageResult Runner::ingest() {
  auto files = ingest::list_numbered(cfg_.frames_dir, cfg_.pattern);
  if (files.empty()) fail("NoFrames", (cfg_.frames_dir / cfg_.pattern).string());
  const int source = static_cast<int>(files.size());
  if (cfg_.frames && *cfg_.frames < source) files.resize(*cfg_.frames);
  Manifest m;
  m.source_frames = source;
  m.frames = static_cast<int>(files.size());
  m.frame_rate = cfg_.frame_rate;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const Frame f = png::read_rgb(files[i]);
    if (i == 0) {
      m.width = f.width;
      m.height = f.height;
    } else if (!f.same_dims(m.width, m.height)) {
      fail("InconsistentDims", files[i].string());
    }
    png::write_rgb(dir("ingest") / numbered("frame", i), f);
  }
  json j;
  j["frames"] = m.frames;
  j["source_frames"] = m.source_frames;
  j["width"] = m.width;
  j["height"] = m.height;
  j["frame_rate"] = m.frame_rate;
  write_file(dir("ingest") / "manifest.json", j.dump(2) + "\n");
  return {"ingest", false,
          std::to_string(m.frames) + " frames " + std::to_string(m.width) + "x" + std::to_string(m.height)};
}

StageResult Runner::matte() {
  const Manifest m = read_manifest(dir("ingest"));
  FrameSequence seq;
  seq.frame_rate = m.frame_rate;
  seq.frames = read_frames(dir("ingest"), m.frames);
  std::vector<ForegroundMask> masks;
  std::string how;
  if (cfg_.matte_dir.empty()) {
    const Frame bg = ingest::median_background_model(seq);
    masks = ingest::subtract_background(seq, bg, cfg_.tau_bg);
    how = "median background";
  } else {
    const auto files = ingest::list_numbered(cfg_.matte_dir, cfg_.matte_pattern);
    if (static_cast<int>(files.size()) != m.source_frames) {
      fail("MatteCountMismatch", std::to_string(files.size()) + " mattes for " + std::to_string(m.source_frames) +
                                     " frames");
    }
    for (int f = 0; f < m.frames; ++f) {
      masks.push_back(ingest::load_matte(files[f], cfg_.matte_threshold));
      require_same_dims(masks.back(), seq.frames[f]);
    }
    how = "external mattes";
  }
  std::size_t fg = 0;
  for (int f = 0; f < m.frames; ++f) {
    if (cfg_.min_blob > 0) masks[f] = ingest::remove_small_blobs(masks[f], cfg_.min_blob);
    for (auto v : masks[f].data) fg += v;
    ingest::write_mask(dir("matte") / numbered("mask", f), masks[f]);
    png::write_rgb(dir("matte") / numbered("frame", f), ingest::apply_mask(seq.frames[f], masks[f]));
  }
  return {"matte", false, how + ", " + std::to_string(fg) + " foreground pixels"};
}

StageResult Runner::edges() {
  const Manifest m = read_manifest(dir("ingest"));
  const auto sets = detect_all(read_frames(dir("matte"), m.frames), cfg_.canny);
  write_file(dir("edges") / "edges.csv", edges_csv(sets));
  std::size_t n = 0;
  for (const auto& s : sets) n += s.points.size();
  return {"edges", false, std::to_string(n) + " edge pixels"};
}

StageResult Runner::track() {
  const Manifest m = read_manifest(dir("ingest"));
  const auto sets = read_edges_csv(dir("edges") / "edges.csv", m.frames);
  const Tracks t = pipeline::track(sets, cfg_, m.width, m.height);
  write_file(dir("track") / "trajectories.csv", trajectories_csv(t.set));
  write_file(dir("track") / "features.csv", features_csv(t.features));
  json w;
  w["frame_count"] = t.set.frame_count;
  w["start_frame"] = t.window.start_frame;
  w["length"] = t.window.length;
  w["trajectories"] = t.set.trajectories.size();
  w["clustered"] = t.features.rows();
  w["excluded"] = t.features.excluded_ids.size();
  write_file(dir("track") / "window.json", w.dump(2) + "\n");
  return {"track", false,
          std::to_string(t.set.trajectories.size()) + " trajectories, window " + std::to_string(t.window.start_frame) +
              "+" + std::to_string(t.window.length) + ", " + std::to_string(t.features.rows()) + " clustered"};
}

StageResult Runner::cluster() {
  const Tracks t = read_tracks(dir("track"));
  const ClusterOutput c = pipeline::cluster(t, cfg_.cut);
  std::string d = "a,b,distance,new_node\n";
  for (const auto& mg : c.dendrogram.merges) {
    d += std::to_string(mg.a) + "," + std::to_string(mg.b) + "," + num(mg.distance) + "," + std::to_string(mg.node) +
         "\n";
  }
  write_file(dir("cluster") / "dendrogram.csv", d);
  write_file(dir("cluster") / "assignment.csv", assignment_csv(c.all));
  return {"cluster", false, "K = " + std::to_string(c.clustered.k)};
}

StageResult Runner::refine() {
  const Manifest m = read_manifest(dir("ingest"));
  const Tracks t = read_tracks(dir("track"));
  const auto masks = read_masks(dir("matte"), m.frames);
  const auto train = resolve_train(cfg_, m.width, m.height, masks, t.features.dim);
  const RefineOutput r = pipeline::refine(t, train, cfg_);

  json p;
  p["d_in"] = r.training.params.d_in;
  p["d_out"] = r.training.params.d_out;
  p["motion_scale"] = r.input.motion_scale;
  p["position_scale"] = r.input.position_scale;
  p["r_sim"] = train.r_sim;
  p["r_dis"] = train.r_dis;
  p["W"] = r.training.params.W;
  p["b"] = r.training.params.b;
  write_file(dir("refine") / "params.json", p.dump() + "\n");

  std::string log = "round,epoch,loss\n";
  for (const auto& e : r.training.log) {
    log += std::to_string(e.round) + "," + std::to_string(e.epoch) + "," + num(e.loss) + "\n";
  }
  write_file(dir("refine") / "training_log.csv", log);
  std::string rounds = "round,k,mean_intra_distance\n";
  for (const auto& d : r.training.rounds) {
    rounds += std::to_string(d.round) + "," + std::to_string(d.k) + "," + num(d.mean_intra_distance) + "\n";
  }
  write_file(dir("refine") / "rounds.csv", rounds);
  write_file(dir("refine") / "assignment.csv", assignment_csv(r.all));
  std::string summary = "K = " + std::to_string(r.clustered.k);
  if (!r.training.log.empty()) summary += ", final loss " + num(r.training.log.back().loss);
  return {"refine", false, summary};
}

StageResult Runner::render() {
  const Manifest m = read_manifest(dir("ingest"));
  const Tracks t = read_tracks(dir("track"));
  const auto sets = read_edges_csv(dir("edges") / "edges.csv", m.frames);
  const auto frames = read_frames(dir("matte"), m.frames);

  auto emit = [&](const Assignment& all, const fs::path& out) {
    const int k = all.k;
    if (cfg_.palette_size > 0 && cfg_.palette_size < k) {
      fail("ConfigError", "render.palette_size (" + std::to_string(cfg_.palette_size) + " < K = " +
                              std::to_string(k) + ")");
    }
    const auto palette = render::make_palette(cfg_.palette_size > 0 ? cfg_.palette_size : k);
    fs::create_directories(out);
    const auto segs = segment(sets, t.set, all, m.width, m.height);
    for (std::size_t f = 0; f < segs.size(); ++f) {
      png::write_rgb(out / numbered("overlay", f), render::overlay(frames[f], segs[f], palette, cfg_.alpha));
      render::write_label_png(out / numbered("labels", f), segs[f]);
    }
  };
  const fs::path primary = cfg_.refine ? dir("refine") : dir("cluster");
  emit(read_assignment_csv(primary / "assignment.csv"), dir("render"));
  if (compare_) emit(read_assignment_csv(dir("cluster") / "assignment.csv"), dir("render") / "unrefined");
  return {"render", false, std::to_string(m.frames) + " frames"};
}

StageResult Runner::eval() {
  const Manifest m = read_manifest(dir("ingest"));
  const Tracks t = read_tracks(dir("track"));
  std::optional<std::vector<LabelGrid>> truth;
  if (!cfg_.truth_dir.empty()) {
    const auto files = ingest::list_numbered(cfg_.truth_dir, cfg_.pattern);
    if (static_cast<int>(files.size()) < m.frames) {
      fail("FrameMismatch", std::to_string(files.size()) + " truth masks for " + std::to_string(m.frames) + " frames");
    }
    truth.emplace();
    for (int f = 0; f < m.frames; ++f) truth->push_back(render::read_label_png(files[f], f).labels);
  }
  auto score = [&](const fs::path& assignment, const fs::path& labels) {
    const Assignment clustered = restrict_to(read_assignment_csv(assignment), t.features.row_ids);
    std::vector<render::PartSegmentation> segs;
    for (int f = 0; f < m.frames; ++f) segs.push_back(render::read_label_png(labels / numbered("labels", f), f));
    return evaluate(t, clustered, segs, truth ? &*truth : nullptr, cfg_);
  };
  const fs::path primary = cfg_.refine ? dir("refine") : dir("cluster");
  const auto report = score(primary / "assignment.csv", dir("render"));
  write_file(dir("eval") / "metrics.json", eval::to_json(report));
  write_file(dir("eval") / "metrics.csv", eval::to_csv(report));

  auto brief = [](const eval::MetricsReport& r) {
    std::string s = "K = " + std::to_string(r.k) + ", mean LL " + num(r.mean_ll);
    if (r.ari) s += ", ARI " + num(*r.ari);
    if (r.ap) s += ", AP " + num(*r.ap);
    return s;
  };
  std::string summary = brief(report);
  if (compare_) {
    const auto plain = score(dir("cluster") / "assignment.csv", dir("render") / "unrefined");
    write_file(dir("eval") / "metrics_unrefined.json", eval::to_json(plain));
    write_file(dir("eval") / "metrics_unrefined.csv", eval::to_csv(plain));
    json side;
    side["unrefined"] = report_json(plain);
    side["refined"] = report_json(report);
    write_file(dir("eval") / "report.json", side.dump(2) + "\n");
    summary = "unrefined: " + brief(plain) + " | refined: " + summary;
  }
  return {"eval", false, summary};
}

}  // namespace wildseg::pipeline
