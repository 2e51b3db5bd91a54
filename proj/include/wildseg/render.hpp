#pragma once

#include <filesystem>
#include <vector>

#include "wildseg/clustering.hpp"
#include "wildseg/edges.hpp"
#include "wildseg/image.hpp"
#include "wildseg/tracking.hpp"

namespace wildseg::render {

struct PartSegmentation {
  int frame_index = 0;
  LabelGrid labels;  // cluster label or kBackground
  friend bool operator==(const PartSegmentation&, const PartSegmentation&) = default;
};

// k colors at evenly spaced hues, full saturation and value.
using Palette = std::vector<Rgb>;
Palette make_palette(int k);

// Edge pixels of `frame_index` occupied by a labeled trajectory get its
// label; lower trajectory ids win collisions. Errors: BadFrame.
LabelGrid rasterize_assignment(const edges::EdgeSet& edges, const tracking::TrajectorySet& set,
                               const clustering::Assignment& assignment, int frame_index, int width, int height);

// Horizontal scanline fill: each gap between consecutive labeled pixels of a
// row takes their label when both endpoints agree.
PartSegmentation fill_between(const LabelGrid& grid, int frame_index = 0);

// out = (1 - alpha) * frame + alpha * palette[label], rounded; background untouched.
Frame overlay(const Frame& frame, const PartSegmentation& seg, const Palette& palette, double alpha);

// Label + 1 in the red channel, 0 for background.
void write_label_png(const std::filesystem::path& path, const PartSegmentation& seg);
PartSegmentation read_label_png(const std::filesystem::path& path, int frame_index = 0);

}  // namespace wildseg::render
