#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wildseg/image.hpp"

namespace wildseg::png {

// Decoded 8-bit image with 1..4 interleaved channels (gray, gray+alpha, rgb, rgba).
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};

// Throws DecodeError(path) on anything libpng cannot read.
RawImage read(const std::filesystem::path& path);

Frame read_rgb(const std::filesystem::path& path);

void write_rgb(const std::filesystem::path& path, const Frame& frame);
void write_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& gray);

}  // namespace wildseg::png
