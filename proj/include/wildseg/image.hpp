#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "wildseg/error.hpp"

namespace wildseg {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Integer pixel coordinate; ordering is lexicographic on (x, y).
struct Point {
  int x = 0, y = 0;
  friend auto operator<=>(const Point&, const Point&) = default;
};

struct Vec2 {
  double x = 0.0, y = 0.0;
};

// Row-major 2-D grid. Frame, masks, label maps and luminance planes are all
// instances of this.
template <class T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) fail("InvalidDims", std::to_string(w) + "x" + std::to_string(h));
  }

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool same_dims(int w, int h) const { return width == w && height == h; }
  template <class U>
  bool same_dims(const Grid<U>& o) const { return width == o.width && height == o.height; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using Frame = Grid<Rgb>;
using ForegroundMask = Grid<std::uint8_t>;  // 1 = foreground
using LumaGrid = Grid<double>;
using LabelGrid = Grid<std::int32_t>;

inline constexpr std::int32_t kBackground = -1;

struct FrameSequence {
  std::vector<Frame> frames;
  double frame_rate = 25.0;
};

template <class A, class B>
void require_same_dims(const Grid<A>& a, const Grid<B>& b) {
  if (!a.same_dims(b)) {
    fail("InconsistentDims", std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                 std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

}  // namespace wildseg
