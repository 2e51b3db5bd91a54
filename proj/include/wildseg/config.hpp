#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include "wildseg/clustering.hpp"
#include "wildseg/contrastive.hpp"
#include "wildseg/edges.hpp"
#include "wildseg/tracking.hpp"

namespace wildseg::config {

// Values of the small TOML subset the config file uses: strings, booleans,
// integers and floats, optionally grouped under [section] headers. Keys come
// back as "section.key".
using Value = std::variant<std::string, bool, std::int64_t, double>;
using Table = std::map<std::string, Value>;

Table parse_toml(const std::string& text);

struct PipelineConfig {
  // [input]
  std::filesystem::path frames_dir;
  std::string pattern = "frame_*.png";
  double frame_rate = 25.0;
  std::filesystem::path matte_dir;  // empty: median background subtraction
  std::string matte_pattern = "frame_*.png";
  int matte_threshold = 128;
  double tau_bg = 30.0;
  int min_blob = 16;
  std::filesystem::path truth_dir;  // optional indexed truth PNGs for eval

  // [run]
  std::filesystem::path out_dir = "wildseg_out";
  std::optional<int> frames;  // truncate to the first N frames
  std::uint64_t seed = 0;

  // [edges]
  edges::CannyParams canny;

  // [track]
  double gate = 0.0;  // 0: 0.15 x frame diagonal
  int min_length = 2;
  double min_coverage = 0.6;
  int min_window = 2;
  tracking::FeatureMode feature_mode = tracking::FeatureMode::Displacements;

  // [cluster]
  clustering::CutCriterion cut;

  // [refine]
  bool refine = true;
  contrastive::TrainConfig train;  // r_sim / r_dis of 0 mean "derive from the footage"
  double r_sim_frac = 0.05;        // of the frame diagonal
  double r_dis_frac = 0.5;         // of the mean foreground bounding-box diagonal
  double position_gain = 2.0;      // margin multiples per r_dis of mean-position offset
  double motion_gain = 0.25;       // margin multiples per median motion-feature distance

  // [render]
  double alpha = 0.5;
  int palette_size = 0;  // 0: one color per cluster

  // [eval]
  double var_floor = 1e-4;
  double iou_threshold = 0.5;

  void validate() const;
};

// Applies every key of `table` to `cfg`; unknown keys and ill-typed values
// raise ConfigError(key).
void apply_table(PipelineConfig& cfg, const Table& table);
PipelineConfig load(const std::filesystem::path& path);

// Canonical "key = value" listing of every field, one per line, sorted.
// Stage hashes are computed over subsets of it.
std::map<std::string, std::string> canonical(const PipelineConfig& cfg);

}  // namespace wildseg::config
