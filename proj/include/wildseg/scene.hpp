#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wildseg/image.hpp"

namespace wildseg::eval {

// A rigid rectangle hinged at its anchor. Root anchors are canvas
// coordinates; child anchors are in the parent's local frame (u along the
// parent's length, v across it). The joint angle at frame t is
//   rest_angle + amplitude * sin(2 pi t / period + phase)
// and composes additively down the tree.
struct PartSpec {
  Vec2 anchor;
  double length = 10.0;
  double width = 4.0;
  int parent = -1;
  double rest_angle = 0.0;  // radians
  double amplitude = 0.0;   // radians
  double phase = 0.0;       // radians
  double period = 30.0;     // frames
  std::optional<Rgb> color;
};

struct SceneSpec {
  int width = 64;
  int height = 64;
  int frames = 60;
  std::vector<PartSpec> parts;
  std::uint64_t seed = 0;
  double color_noise = 0.0;  // std-dev of per-channel noise on part pixels
  double jitter = 0.0;       // std-dev (pixels) of per-frame root translation

  void validate() const;
};

struct Scene {
  FrameSequence sequence;
  std::vector<LabelGrid> truth;         // part id per pixel, kBackground elsewhere
  std::vector<ForegroundMask> mattes;   // exact foreground
};

// Errors: OutOfCanvas(part, frame), ConfigError for malformed specs.
Scene generate_scene(const SceneSpec& spec);

SceneSpec scene_from_json(const std::string& text);
SceneSpec load_scene_spec(const std::filesystem::path& path);

// frames/frame_%05d.png, mattes/frame_%05d.png (0/255), truth/frame_%05d.png
// (part id + 1 in red).
void write_scene(const std::filesystem::path& dir, const Scene& scene);

// Two disjoint limbs hanging side by side with identical angular motion.
SceneSpec two_limb_scene(int frames, std::uint64_t seed);
// Body with two legs swinging at different periods; jitter and color noise
// enabled. Fastest pixel moves about 2.7 px per frame.
SceneSpec three_part_scene(int frames, std::uint64_t seed);
// A static white square of the given side on a black canvas.
SceneSpec square_scene(int canvas, int side, int frames);

}  // namespace wildseg::eval
