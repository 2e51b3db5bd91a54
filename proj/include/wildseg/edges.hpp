#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "wildseg/image.hpp"

namespace wildseg::edges {

// Quantized gradient direction, in degrees folded to [0, 180).
enum class Orientation : std::uint8_t { Deg0 = 0, Deg45 = 1, Deg90 = 2, Deg135 = 3 };

struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> gx, gy, magnitude;
  std::vector<Orientation> orientation;

  GradientField() = default;
  GradientField(int w, int h);

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

// Sorted (x, y)-lexicographic, duplicate-free.
struct EdgeSet {
  int frame_index = 0;
  std::vector<Point> points;

  bool contains(Point p) const;
  friend bool operator==(const EdgeSet&, const EdgeSet&) = default;
};

// Unset thresholds are chosen per frame: high = high_percentile of the
// nonzero magnitudes, low = low_ratio * high.
struct CannyParams {
  double sigma = 1.4;
  std::optional<double> low;
  std::optional<double> high;
  double high_percentile = 0.9;
  double low_ratio = 0.4;

  void validate() const;
};

using ChannelPlanes = std::array<LumaGrid, 3>;

// Folds atan2(gy, gx) into [0, 180) degrees.
double folded_angle_deg(double gx, double gy);
Orientation quantize(double gx, double gy);

// Separable Gaussian, radius ceil(3*sigma), clamp-to-edge; sigma == 0 is the identity.
LumaGrid gaussian_smooth(const LumaGrid& gray, double sigma);

ChannelPlanes split_channels(const Frame& frame);

// 3x3 Sobel per channel; each pixel takes (gx, gy) from the channel with the
// largest magnitude, ties resolved R, then G, then B.
GradientField color_gradient(const ChannelPlanes& planes);
GradientField color_gradient(const Frame& frame);

// Non-maximum suppression along the quantized orientation followed by
// 8-connected hysteresis. The outermost ring of pixels is never an edge.
EdgeSet nms_hysteresis(const GradientField& field, double low, double high);

// Nearest-rank percentile of the strictly positive magnitudes; 0 when none.
double magnitude_percentile(const GradientField& field, double q);

EdgeSet detect_edges(const Frame& frame, const CannyParams& params, int frame_index = 0);

}  // namespace wildseg::edges
