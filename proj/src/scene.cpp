#include "wildseg/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wildseg/png_io.hpp"
#include "wildseg/render.hpp"
#include "wildseg/rng.hpp"

namespace wildseg::eval {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Pose {
  Vec2 pivot;
  double angle = 0.0;
};

Vec2 rotate(Vec2 v, double a) { return {v.x * std::cos(a) - v.y * std::sin(a), v.x * std::sin(a) + v.y * std::cos(a)}; }

}  // namespace

void SceneSpec::validate() const {
  if (width < 4 || height < 4) fail("ConfigError", "scene canvas must be at least 4x4");
  if (frames < 1) fail("NeedMoreFrames", "scene needs >= 1 frame");
  if (parts.empty()) fail("ConfigError", "scene has no parts");
  if (color_noise < 0.0 || jitter < 0.0) fail("ConfigError", "noise levels must be >= 0");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (p.parent >= static_cast<int>(i) || p.parent < -1) {
      fail("ConfigError", "part " + std::to_string(i) + " must reference an earlier parent");
    }
    if (!(p.length > 0.0 && p.width > 0.0)) fail("ConfigError", "part " + std::to_string(i) + " has empty extent");
    if (!(p.period > 0.0)) fail("ConfigError", "part " + std::to_string(i) + " needs a positive period");
  }
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto palette = render::make_palette(static_cast<int>(spec.parts.size()));

  Scene scene;
  scene.sequence.frame_rate = 25.0;
  std::vector<Pose> pose(spec.parts.size());

  for (int t = 0; t < spec.frames; ++t) {
    Frame frame(spec.width, spec.height);
    LabelGrid truth(spec.width, spec.height, kBackground);

    for (std::size_t i = 0; i < spec.parts.size(); ++i) {
      const auto& p = spec.parts[i];
      const double joint = p.rest_angle + p.amplitude * std::sin(2.0 * kPi * t / p.period + p.phase);
      if (p.parent < 0) {
        Vec2 pivot = p.anchor;
        if (spec.jitter > 0.0) {
          pivot.x += spec.jitter * rng.normal();
          pivot.y += spec.jitter * rng.normal();
        }
        pose[i] = {pivot, joint};
      } else {
        const Pose& parent = pose[p.parent];
        const Vec2 off = rotate(p.anchor, parent.angle);
        pose[i] = {{parent.pivot.x + off.x, parent.pivot.y + off.y}, parent.angle + joint};
      }

      const Vec2 dir{std::cos(pose[i].angle), std::sin(pose[i].angle)};
      const Vec2 across{-dir.y, dir.x};
      const double hw = 0.5 * p.width;
      double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
      for (double u : {0.0, p.length}) {
        for (double v : {-hw, hw}) {
          const double cx = pose[i].pivot.x + u * dir.x + v * across.x;
          const double cy = pose[i].pivot.y + u * dir.y + v * across.y;
          min_x = std::min(min_x, cx);
          max_x = std::max(max_x, cx);
          min_y = std::min(min_y, cy);
          max_y = std::max(max_y, cy);
        }
      }
      if (min_x < 0.0 || min_y < 0.0 || max_x > spec.width - 1 || max_y > spec.height - 1) {
        fail("OutOfCanvas", "part " + std::to_string(i) + ", frame " + std::to_string(t));
      }

      const Rgb color = p.color.value_or(palette[i]);
      for (int y = static_cast<int>(std::floor(min_y)); y <= static_cast<int>(std::ceil(max_y)); ++y) {
        for (int x = static_cast<int>(std::floor(min_x)); x <= static_cast<int>(std::ceil(max_x)); ++x) {
          if (!frame.contains(x, y)) continue;
          const double rx = x - pose[i].pivot.x, ry = y - pose[i].pivot.y;
          const double u = rx * dir.x + ry * dir.y;
          const double v = rx * across.x + ry * across.y;
          if (u < 0.0 || u >= p.length || v < -hw || v >= hw) continue;
          frame.at(x, y) = color;
          truth.at(x, y) = static_cast<std::int32_t>(i);
        }
      }
    }

    if (spec.color_noise > 0.0) {
      auto noisy = [&](std::uint8_t c) {
        const double v = std::round(c + spec.color_noise * rng.normal());
        return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      };
      for (std::size_t i = 0; i < frame.data.size(); ++i) {
        if (truth.data[i] == kBackground) continue;
        frame.data[i] = {noisy(frame.data[i].r), noisy(frame.data[i].g), noisy(frame.data[i].b)};
      }
    }

    ForegroundMask matte(spec.width, spec.height);
    for (std::size_t i = 0; i < matte.data.size(); ++i) matte.data[i] = truth.data[i] != kBackground;

    scene.sequence.frames.push_back(std::move(frame));
    scene.truth.push_back(std::move(truth));
    scene.mattes.push_back(std::move(matte));
  }
  return scene;
}

SceneSpec scene_from_json(const std::string& text) {
  SceneSpec spec;
  try {
    const auto j = nlohmann::json::parse(text);
    static const std::vector<std::string> kTop{"width", "height", "frames", "parts", "seed", "color_noise", "jitter"};
    static const std::vector<std::string> kPart{"anchor", "length", "width", "parent", "rest_angle",
                                                "amplitude", "phase", "period", "color"};
    for (const auto& [key, val] : j.items()) {
      if (std::find(kTop.begin(), kTop.end(), key) == kTop.end()) fail("ConfigError", "unknown scene key '" + key + "'");
    }
    spec.width = j.value("width", spec.width);
    spec.height = j.value("height", spec.height);
    spec.frames = j.value("frames", spec.frames);
    spec.seed = j.value("seed", spec.seed);
    spec.color_noise = j.value("color_noise", spec.color_noise);
    spec.jitter = j.value("jitter", spec.jitter);
    for (const auto& jp : j.at("parts")) {
      for (const auto& [key, val] : jp.items()) {
        if (std::find(kPart.begin(), kPart.end(), key) == kPart.end()) {
          fail("ConfigError", "unknown part key '" + key + "'");
        }
      }
      PartSpec p;
      const auto& a = jp.at("anchor");
      p.anchor = {a.at(0).get<double>(), a.at(1).get<double>()};
      p.length = jp.value("length", p.length);
      p.width = jp.value("width", p.width);
      p.parent = jp.value("parent", p.parent);
      p.rest_angle = jp.value("rest_angle", p.rest_angle);
      p.amplitude = jp.value("amplitude", p.amplitude);
      p.phase = jp.value("phase", p.phase);
      p.period = jp.value("period", p.period);
      if (jp.contains("color")) {
        const auto& c = jp.at("color");
        p.color = Rgb{c.at(0).get<std::uint8_t>(), c.at(1).get<std::uint8_t>(), c.at(2).get<std::uint8_t>()};
      }
      spec.parts.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    fail("ConfigError", std::string("scene spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("ConfigError", "cannot read scene spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

void write_scene(const std::filesystem::path& dir, const Scene& scene) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "mattes");
  fs::create_directories(dir / "truth");
  char name[32];
  for (std::size_t t = 0; t < scene.sequence.frames.size(); ++t) {
    std::snprintf(name, sizeof(name), "frame_%05zu.png", t);
    png::write_rgb(dir / "frames" / name, scene.sequence.frames[t]);
    Grid<std::uint8_t> matte(scene.mattes[t].width, scene.mattes[t].height);
    for (std::size_t i = 0; i < matte.data.size(); ++i) matte.data[i] = scene.mattes[t].data[i] ? 255 : 0;
    png::write_gray(dir / "mattes" / name, matte);
    render::write_label_png(dir / "truth" / name, render::PartSegmentation{static_cast<int>(t), scene.truth[t]});
  }
}

SceneSpec two_limb_scene(int frames, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x11b));
  SceneSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.frames = frames;
  spec.seed = seed;
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double period = rng.uniform(30.0, 50.0);
  const double amplitude = rng.uniform(0.35, 0.5);
  const double shift_x = rng.uniform(-2.0, 2.0), shift_y = rng.uniform(-2.0, 2.0);
  for (double x : {17.0, 47.0}) {
    PartSpec limb;
    limb.anchor = {x + shift_x, 14.0 + shift_y};
    limb.length = 22.0;
    limb.width = 5.0;
    limb.rest_angle = kPi / 2.0;
    limb.amplitude = amplitude;
    limb.phase = phase;
    limb.period = period;
    spec.parts.push_back(limb);
  }
  return spec;
}

SceneSpec three_part_scene(int frames, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x3a7));
  SceneSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.frames = frames;
  spec.seed = seed;
  spec.jitter = 0.3;
  spec.color_noise = 8.0;

  // Body kept shorter than half the silhouette diagonal so that proximity
  // sampling rarely pairs its two ends as dissimilar.
  PartSpec torso;
  torso.anchor = {22.0 + rng.uniform(-2.0, 2.0), 18.0 + rng.uniform(-2.0, 2.0)};
  torso.length = 20.0;
  torso.width = 8.0;
  torso.amplitude = 0.03;
  torso.period = 80.0;
  torso.phase = rng.uniform(0.0, 2.0 * kPi);
  spec.parts.push_back(torso);

  for (int leg = 0; leg < 2; ++leg) {
    PartSpec p;
    p.parent = 0;
    p.anchor = {leg == 0 ? 3.0 : 17.0, 4.0};
    p.length = 18.0;
    p.width = 5.0;
    p.rest_angle = kPi / 2.0;
    p.amplitude = rng.uniform(0.35, 0.5);
    p.period = (leg == 0 ? 36.0 : 24.0) * rng.uniform(0.9, 1.1);
    p.phase = rng.uniform(0.0, 2.0 * kPi);
    spec.parts.push_back(p);
  }
  return spec;
}

SceneSpec square_scene(int canvas, int side, int frames) {
  SceneSpec spec;
  spec.width = canvas;
  spec.height = canvas;
  spec.frames = frames;
  PartSpec sq;
  const int lo = (canvas - side) / 2;
  sq.anchor = {static_cast<double>(lo), lo + side / 2.0};
  sq.length = side;
  sq.width = side;
  sq.color = Rgb{255, 255, 255};
  spec.parts.push_back(sq);
  return spec;
}

}  // namespace wildseg::eval
