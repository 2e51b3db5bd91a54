#include "wildseg/render.hpp"

#include <cmath>

#include "wildseg/png_io.hpp"

namespace wildseg::render {

Palette make_palette(int k) {
  Palette p;
  p.reserve(std::max(k, 0));
  for (int i = 0; i < k; ++i) {
    // HSV with s = v = 1.
    const double h = 6.0 * static_cast<double>(i) / static_cast<double>(k);
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const auto up = static_cast<std::uint8_t>(std::lround(255.0 * f));
    const auto down = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - f)));
    switch (sector) {
      case 0: p.push_back({255, up, 0}); break;
      case 1: p.push_back({down, 255, 0}); break;
      case 2: p.push_back({0, 255, up}); break;
      case 3: p.push_back({0, down, 255}); break;
      case 4: p.push_back({up, 0, 255}); break;
      default: p.push_back({255, 0, down}); break;
    }
  }
  return p;
}

LabelGrid rasterize_assignment(const edges::EdgeSet& edges, const tracking::TrajectorySet& set,
                               const clustering::Assignment& assignment, int frame_index, int width, int height) {
  if (frame_index < 0 || frame_index >= set.frame_count) {
    fail("BadFrame", std::to_string(frame_index) + " outside [0, " + std::to_string(set.frame_count) + ")");
  }
  LabelGrid grid(width, height, kBackground);
  // Assignment ids ascend, so the first writer is the lowest id.
  for (std::size_t a = 0; a < assignment.ids.size(); ++a) {
    const auto& tr = set.by_id(assignment.ids[a]);
    if (!tr.covers(frame_index)) continue;
    const Point p = tr.at_frame(frame_index);
    if (!grid.contains(p.x, p.y) || !edges.contains(p)) continue;
    if (grid.at(p.x, p.y) == kBackground) grid.at(p.x, p.y) = assignment.labels[a];
  }
  return grid;
}

PartSegmentation fill_between(const LabelGrid& grid, int frame_index) {
  PartSegmentation seg{frame_index, grid};
  for (int y = 0; y < grid.height; ++y) {
    int prev_x = -1;
    for (int x = 0; x < grid.width; ++x) {
      const auto label = grid.at(x, y);
      if (label == kBackground) continue;
      if (prev_x >= 0 && grid.at(prev_x, y) == label) {
        for (int f = prev_x + 1; f < x; ++f) seg.labels.at(f, y) = label;
      }
      prev_x = x;
    }
  }
  return seg;
}

Frame overlay(const Frame& frame, const PartSegmentation& seg, const Palette& palette, double alpha) {
  require_same_dims(frame, seg.labels);
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("ConfigError", "overlay alpha must lie in [0, 1]");
  Frame out = frame;
  auto blend = [alpha](std::uint8_t base, std::uint8_t tint) {
    return static_cast<std::uint8_t>(std::lround((1.0 - alpha) * base + alpha * tint));
  };
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const auto label = seg.labels.data[i];
    if (label == kBackground) continue;
    if (label < 0 || label >= static_cast<int>(palette.size())) fail("DimError", "label outside palette");
    const Rgb& c = palette[label];
    out.data[i] = {blend(out.data[i].r, c.r), blend(out.data[i].g, c.g), blend(out.data[i].b, c.b)};
  }
  return out;
}

void write_label_png(const std::filesystem::path& path, const PartSegmentation& seg) {
  Frame img(seg.labels.width, seg.labels.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const auto label = seg.labels.data[i];
    if (label > 254) fail("DimError", "label png holds at most 255 labels");
    img.data[i].r = static_cast<std::uint8_t>(label + 1);
  }
  png::write_rgb(path, img);
}

PartSegmentation read_label_png(const std::filesystem::path& path, int frame_index) {
  const Frame img = png::read_rgb(path);
  PartSegmentation seg{frame_index, LabelGrid(img.width, img.height, kBackground)};
  for (std::size_t i = 0; i < img.data.size(); ++i) seg.labels.data[i] = static_cast<std::int32_t>(img.data[i].r) - 1;
  return seg;
}

}  // namespace wildseg::render
