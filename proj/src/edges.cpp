#include "wildseg/edges.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace wildseg::edges {

GradientField::GradientField(int w, int h)
    : width(w),
      height(h),
      gx(static_cast<std::size_t>(w) * h, 0.0),
      gy(gx.size(), 0.0),
      magnitude(gx.size(), 0.0),
      orientation(gx.size(), Orientation::Deg0) {}

bool EdgeSet::contains(Point p) const { return std::binary_search(points.begin(), points.end(), p); }

void CannyParams::validate() const {
  if (!(sigma >= 0.0)) fail("ConfigError", "edges.sigma must be >= 0");
  if (low && *low < 0.0) fail("ConfigError", "edges.low must be >= 0");
  if (low && high && *low > *high) fail("ConfigError", "edges.low must be <= edges.high");
  if (!(high_percentile > 0.0 && high_percentile <= 1.0)) fail("ConfigError", "edges.high_percentile in (0, 1]");
  if (!(low_ratio >= 0.0 && low_ratio <= 1.0)) fail("ConfigError", "edges.low_ratio in [0, 1]");
}

double folded_angle_deg(double gx, double gy) {
  double deg = std::atan2(gy, gx) * (180.0 / 3.14159265358979323846);
  if (deg < 0.0) deg += 180.0;
  if (deg >= 180.0) deg -= 180.0;
  return deg;
}

Orientation quantize(double gx, double gy) {
  const double deg = folded_angle_deg(gx, gy);
  if (deg < 22.5 || deg >= 157.5) return Orientation::Deg0;
  if (deg < 67.5) return Orientation::Deg45;
  if (deg < 112.5) return Orientation::Deg90;
  return Orientation::Deg135;
}

LumaGrid gaussian_smooth(const LumaGrid& gray, double sigma) {
  if (!(sigma >= 0.0)) fail("ConfigError", "sigma must be >= 0");
  if (sigma == 0.0) return gray;

  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  const int w = gray.width, h = gray.height;
  LumaGrid tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * gray.at(std::clamp(x + i, 0, w - 1), y);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1));
      out.at(x, y) = acc;
    }
  }
  return out;
}

ChannelPlanes split_channels(const Frame& frame) {
  ChannelPlanes planes{LumaGrid(frame.width, frame.height), LumaGrid(frame.width, frame.height),
                       LumaGrid(frame.width, frame.height)};
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    planes[0].data[i] = frame.data[i].r;
    planes[1].data[i] = frame.data[i].g;
    planes[2].data[i] = frame.data[i].b;
  }
  return planes;
}

GradientField color_gradient(const ChannelPlanes& planes) {
  const int w = planes[0].width, h = planes[0].height;
  for (const auto& p : planes) require_same_dims(p, planes[0]);
  GradientField field(w, h);

  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      double best_gx = 0.0, best_gy = 0.0, best_mag2 = -1.0;
      for (const auto& c : planes) {
        const double gx = (c.at(xp, ym) + 2.0 * c.at(xp, y) + c.at(xp, yp)) -
                          (c.at(xm, ym) + 2.0 * c.at(xm, y) + c.at(xm, yp));
        const double gy = (c.at(xm, yp) + 2.0 * c.at(x, yp) + c.at(xp, yp)) -
                          (c.at(xm, ym) + 2.0 * c.at(x, ym) + c.at(xp, ym));
        const double mag2 = gx * gx + gy * gy;
        if (mag2 > best_mag2) {
          best_mag2 = mag2;
          best_gx = gx;
          best_gy = gy;
        }
      }
      const std::size_t i = field.index(x, y);
      field.gx[i] = best_gx;
      field.gy[i] = best_gy;
      field.magnitude[i] = std::sqrt(best_mag2);
      field.orientation[i] = quantize(best_gx, best_gy);
    }
  }
  return field;
}

GradientField color_gradient(const Frame& frame) { return color_gradient(split_channels(frame)); }

namespace {

// Neighbor offsets along the gradient direction (image y grows downward).
constexpr int kAlong[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};

}  // namespace

EdgeSet nms_hysteresis(const GradientField& field, double low, double high) {
  if (low > high) fail("ConfigError", "low must be <= high");
  const int w = field.width, h = field.height;
  // 0 = rejected, 1 = weak, 2 = strong
  std::vector<std::uint8_t> cls(static_cast<std::size_t>(w) * h, 0);
  std::deque<Point> queue;

  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const std::size_t i = field.index(x, y);
      const double m = field.magnitude[i];
      if (m <= 0.0 || m < low) continue;
      const auto& d = kAlong[static_cast<int>(field.orientation[i])];
      if (m < field.magnitude[field.index(x + d[0], y + d[1])]) continue;
      if (m < field.magnitude[field.index(x - d[0], y - d[1])]) continue;
      if (m >= high) {
        cls[i] = 2;
        queue.push_back({x, y});
      } else {
        cls[i] = 1;
      }
    }
  }

  std::vector<std::uint8_t> keep(cls.size(), 0);
  for (const Point& p : queue) keep[field.index(p.x, p.y)] = 1;
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = p.x + dx, ny = p.y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t n = field.index(nx, ny);
        if (cls[n] == 0 || keep[n]) continue;
        keep[n] = 1;
        queue.push_back({nx, ny});
      }
    }
  }

  EdgeSet out;
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      if (keep[field.index(x, y)]) out.points.push_back({x, y});
    }
  }
  return out;
}

double magnitude_percentile(const GradientField& field, double q) {
  std::vector<double> v;
  for (double m : field.magnitude) {
    if (m > 0.0) v.push_back(m);
  }
  if (v.empty()) return 0.0;
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  std::nth_element(v.begin(), v.begin() + (rank - 1), v.end());
  return v[rank - 1];
}

EdgeSet detect_edges(const Frame& frame, const CannyParams& params, int frame_index) {
  params.validate();
  ChannelPlanes planes = split_channels(frame);
  for (auto& p : planes) p = gaussian_smooth(p, params.sigma);
  const GradientField field = color_gradient(planes);

  double high = params.high.value_or(0.0);
  if (!params.high) {
    high = magnitude_percentile(field, params.high_percentile);
    if (high <= 0.0) return EdgeSet{frame_index, {}};
  }
  double low = params.low.value_or(params.low_ratio * high);
  low = std::min(low, high);

  EdgeSet edges = nms_hysteresis(field, low, high);
  edges.frame_index = frame_index;
  return edges;
}

}  // namespace wildseg::edges
