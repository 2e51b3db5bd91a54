// wildseg command-line front end.
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wildseg/config.hpp"
#include "wildseg/pipeline.hpp"
#include "wildseg/scene.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<int> frames;
  std::optional<std::uint64_t> seed;
  bool compare = false;
  std::string out_dir;
  std::optional<int> k;
  std::string feature_mode;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "TOML configuration file");
  cmd->add_option("--frames", f.frames, "Use only the first N frames");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_flag("--compare-contrastive", f.compare, "Report with and without the refine stage");
  cmd->add_option("--out-dir", f.out_dir, "Cache / output directory");
  cmd->add_option("--k", f.k, "Cut the dendrogram at exactly K clusters");
  cmd->add_option("--feature-mode", f.feature_mode, "positions | displacements");
}

wildseg::config::PipelineConfig resolve(const Flags& f) {
  wildseg::config::PipelineConfig cfg;
  if (!f.config.empty()) cfg = wildseg::config::load(f.config);
  if (f.frames) cfg.frames = *f.frames;
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (f.k) cfg.cut = wildseg::clustering::CutCriterion::exact(*f.k);
  if (!f.feature_mode.empty()) {
    try {
      cfg.feature_mode = wildseg::tracking::parse_feature_mode(f.feature_mode);
    } catch (const wildseg::Error&) {
      wildseg::fail("ConfigError", "track.feature_mode");
    }
  }
  cfg.validate();
  return cfg;
}

// Writes the scene plus a config that points at it.
void synth(const std::string& spec_path, const Flags& f) {
  auto spec = wildseg::eval::load_scene_spec(spec_path);
  if (f.frames) spec.frames = *f.frames;
  if (f.seed) spec.seed = *f.seed;
  const std::filesystem::path out = f.out_dir.empty() ? std::filesystem::path("scene") : std::filesystem::path(f.out_dir);
  const auto scene = wildseg::eval::generate_scene(spec);
  wildseg::eval::write_scene(out, scene);
  const auto abs = std::filesystem::absolute(out);
  std::ofstream toml(out / "wildseg.toml");
  toml << "[input]\n"
       << "frames_dir = \"" << (abs / "frames").generic_string() << "\"\n"
       << "matte_dir = \"" << (abs / "mattes").generic_string() << "\"\n"
       << "truth_dir = \"" << (abs / "truth").generic_string() << "\"\n"
       << "\n[run]\n"
       << "out_dir = \"" << (abs / "run").generic_string() << "\"\n";
  std::cout << "synth: " << spec.frames << " frames, " << spec.parts.size() << " parts -> " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised motion-based part segmentation"};
  app.require_subcommand(1);

  Flags run_f, stage_f, synth_f, eval_f;
  std::string stage_name, spec_path;

  auto* run = app.add_subcommand("run", "Run every stage");
  add_flags(run, run_f);
  auto* stage = app.add_subcommand("stage", "Run one stage");
  stage->add_option("name", stage_name, "ingest | matte | edges | track | cluster | refine | render | eval")->required();
  add_flags(stage, stage_f);
  auto* syn = app.add_subcommand("synth", "Render a synthetic articulated scene");
  syn->add_option("spec", spec_path, "Scene spec JSON")->required();
  add_flags(syn, synth_f);
  auto* ev = app.add_subcommand("eval", "Score the cached results");
  add_flags(ev, eval_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      wildseg::pipeline::Runner runner(resolve(run_f), run_f.compare, std::cout);
      runner.run_all();
    } else if (*stage) {
      wildseg::pipeline::Runner runner(resolve(stage_f), stage_f.compare, std::cout);
      runner.run_stage(stage_name);
    } else if (*syn) {
      synth(spec_path, synth_f);
    } else if (*ev) {
      wildseg::pipeline::Runner runner(resolve(eval_f), eval_f.compare, std::cout);
      runner.run_stage("eval");
    }
  } catch (const wildseg::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "IoError: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
