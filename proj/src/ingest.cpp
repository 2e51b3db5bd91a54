#include "wildseg/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <queue>

#include "wildseg/png_io.hpp"

namespace wildseg::ingest {

namespace fs = std::filesystem;

std::vector<fs::path> list_numbered(const fs::path& directory, const std::string& pattern) {
  const auto star = pattern.find('*');
  if (star == std::string::npos || pattern.find('*', star + 1) != std::string::npos) {
    fail("ConfigError", "pattern must contain exactly one '*': " + pattern);
  }
  if (!fs::is_directory(directory)) fail("NoFrames", "not a directory: " + directory.string());

  const std::string prefix = pattern.substr(0, star);
  const std::string suffix = pattern.substr(star + 1);
  std::vector<std::pair<unsigned long long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() <= prefix.size() + suffix.size()) continue;
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
    found.emplace_back(std::stoull(digits), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  out.reserve(found.size());
  for (auto& [n, p] : found) out.push_back(std::move(p));
  return out;
}

FrameSequence load_frame_sequence(const fs::path& directory, const std::string& pattern, double frame_rate) {
  if (!(frame_rate > 0.0)) fail("ConfigError", "frame_rate must be positive");
  const auto files = list_numbered(directory, pattern);
  if (files.empty()) fail("NoFrames", directory.string() + "/" + pattern);

  FrameSequence seq;
  seq.frame_rate = frame_rate;
  seq.frames.reserve(files.size());
  for (const auto& f : files) {
    Frame frame = png::read_rgb(f);
    if (!seq.frames.empty() && !frame.same_dims(seq.frames.front())) {
      fail("InconsistentDims", f.string());
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

Frame median_background_model(const FrameSequence& seq) {
  const auto& frames = seq.frames;
  if (frames.size() < 3) fail("NeedMoreFrames", "median background needs >= 3 frames");
  for (const auto& f : frames) require_same_dims(f, frames.front());

  Frame out(frames.front().width, frames.front().height);
  const std::size_t n = frames.size();
  const std::size_t mid = (n - 1) / 2;
  std::vector<std::uint8_t> r(n), g(n), b(n);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      r[k] = frames[k].data[i].r;
      g[k] = frames[k].data[i].g;
      b[k] = frames[k].data[i].b;
    }
    std::nth_element(r.begin(), r.begin() + mid, r.end());
    std::nth_element(g.begin(), g.begin() + mid, g.end());
    std::nth_element(b.begin(), b.begin() + mid, b.end());
    out.data[i] = {r[mid], g[mid], b[mid]};
  }
  return out;
}

ForegroundMask foreground_mask(const Frame& frame, const Frame& background, double tau_bg) {
  require_same_dims(frame, background);
  if (!(tau_bg >= 0.0)) fail("ConfigError", "tau_bg must be >= 0");
  ForegroundMask mask(frame.width, frame.height);
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    const int dr = int(frame.data[i].r) - background.data[i].r;
    const int dg = int(frame.data[i].g) - background.data[i].g;
    const int db = int(frame.data[i].b) - background.data[i].b;
    const double d = std::sqrt(double(dr * dr + dg * dg + db * db));
    mask.data[i] = d > tau_bg ? 1 : 0;
  }
  return mask;
}

std::vector<ForegroundMask> subtract_background(const FrameSequence& seq, const Frame& background, double tau_bg) {
  std::vector<ForegroundMask> masks;
  masks.reserve(seq.frames.size());
  for (const auto& f : seq.frames) masks.push_back(foreground_mask(f, background, tau_bg));
  return masks;
}

ForegroundMask load_matte(const fs::path& path, int threshold) {
  const png::RawImage raw = png::read(path);
  const int alpha_channel = (raw.channels == 2 || raw.channels == 4) ? raw.channels - 1 : 0;
  ForegroundMask mask(raw.width, raw.height);
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    mask.data[i] = raw.bytes[i * raw.channels + alpha_channel] >= threshold ? 1 : 0;
  }
  return mask;
}

std::vector<ForegroundMask> load_matte_sequence(const fs::path& directory, const std::string& pattern, int threshold,
                                                std::optional<std::size_t> expected_count) {
  const auto files = list_numbered(directory, pattern);
  if (expected_count && files.size() != *expected_count) {
    fail("MatteCountMismatch", std::to_string(files.size()) + " mattes for " + std::to_string(*expected_count) +
                                   " frames in " + directory.string());
  }
  std::vector<ForegroundMask> masks;
  masks.reserve(files.size());
  for (const auto& f : files) {
    masks.push_back(load_matte(f, threshold));
    if (!masks.back().same_dims(masks.front())) fail("InconsistentDims", f.string());
  }
  return masks;
}

Frame apply_mask(const Frame& frame, const ForegroundMask& mask) {
  require_same_dims(frame, mask);
  Frame out = frame;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!mask.data[i]) out.data[i] = {0, 0, 0};
  }
  return out;
}

ForegroundMask remove_small_blobs(const ForegroundMask& mask, int min_blob) {
  ForegroundMask out = mask;
  if (min_blob <= 1) return out;
  std::vector<std::uint8_t> seen(mask.data.size(), 0);
  std::vector<std::size_t> component;
  static constexpr std::array<std::array<int, 2>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
      if (!mask.data[idx] || seen[idx]) continue;
      component.clear();
      std::queue<Point> q;
      q.push({x, y});
      seen[idx] = 1;
      while (!q.empty()) {
        const Point p = q.front();
        q.pop();
        component.push_back(static_cast<std::size_t>(p.y) * mask.width + p.x);
        for (const auto& s : kSteps) {
          const int nx = p.x + s[0], ny = p.y + s[1];
          if (!mask.contains(nx, ny)) continue;
          const std::size_t n = static_cast<std::size_t>(ny) * mask.width + nx;
          if (mask.data[n] && !seen[n]) {
            seen[n] = 1;
            q.push({nx, ny});
          }
        }
      }
      if (component.size() < static_cast<std::size_t>(min_blob)) {
        for (auto c : component) out.data[c] = 0;
      }
    }
  }
  return out;
}

void write_mask(const fs::path& path, const ForegroundMask& mask) {
  Grid<std::uint8_t> gray(mask.width, mask.height);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = mask.data[i] ? 255 : 0;
  png::write_gray(path, gray);
}

}  // namespace wildseg::ingest
