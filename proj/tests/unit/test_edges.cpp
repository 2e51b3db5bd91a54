#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "oracles/oracles.hpp"
#include "unit/util.hpp"
#include "wildseg/edges.hpp"
#include "wildseg/scene.hpp"

using namespace wildseg;
using namespace wildseg::edges;

namespace {

GradientField random_field(Rng& rng, int w, int h) {
  GradientField f(w, h);
  for (std::size_t i = 0; i < f.gx.size(); ++i) {
    if (rng.below(4) == 0) continue;  // leave some zeros
    f.gx[i] = rng.uniform(-10.0, 10.0);
    f.gy[i] = rng.uniform(-10.0, 10.0);
    f.magnitude[i] = std::hypot(f.gx[i], f.gy[i]);
    f.orientation[i] = quantize(f.gx[i], f.gy[i]);
  }
  return f;
}

Frame rotate90(const Frame& f) {
  Frame out(f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) out.at(f.height - 1 - y, x) = f.at(x, y);
  return out;
}

}  // namespace

TEST_CASE("gaussian_smooth examples") {
  LumaGrid c(9, 7, 42.0);
  for (double s : {0.5, 1.0, 1.4, 3.0}) {
    const auto out = gaussian_smooth(c, s);
    for (double v : out.data) CHECK(v == doctest::Approx(42.0).epsilon(1e-12));
  }
  Rng rng(2);
  LumaGrid r(6, 6);
  for (auto& v : r.data) v = rng.uniform();
  CHECK(gaussian_smooth(r, 0.0) == r);

  LumaGrid impulse(11, 11, 0.0);
  impulse.at(5, 5) = 1.0;
  const auto got = gaussian_smooth(impulse, 1.0);
  const auto want = oracle::dense_gaussian(impulse, 1.0);
  for (std::size_t i = 0; i < got.data.size(); ++i) CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  // radius ceil(3 sigma) = 3: nothing beyond it
  CHECK(got.at(5, 1) == 0.0);
  CHECK(got.at(5, 2) > 0.0);
}

TEST_CASE("gaussian_smooth matches dense convolution on random grids with clamped borders") {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    LumaGrid g(7 + t, 5 + t);
    for (auto& v : g.data) v = rng.uniform(0.0, 255.0);
    const double s = rng.uniform(0.3, 2.0);
    const auto got = gaussian_smooth(g, s), want = oracle::dense_gaussian(g, s);
    for (std::size_t i = 0; i < got.data.size(); ++i) CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("color_gradient examples") {
  const auto zero = color_gradient(Frame(8, 8, Rgb{40, 90, 200}));
  for (double m : zero.magnitude) CHECK(m == 0.0);

  // grayscale frame == single-channel Sobel by hand
  Rng rng(11);
  Frame g(7, 6);
  for (auto& px : g.data) {
    const auto v = std::uint8_t(rng.below(256));
    px = {v, v, v};
  }
  const auto f = color_gradient(g);
  auto at = [&](int x, int y) { return double(g.at(std::clamp(x, 0, 6), std::clamp(y, 0, 5)).r); };
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 7; ++x) {
      const double gx = at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1) - at(x - 1, y - 1) - 2 * at(x - 1, y) -
                        at(x - 1, y + 1);
      const double gy = at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1) - at(x - 1, y - 1) - 2 * at(x, y - 1) -
                        at(x + 1, y - 1);
      CHECK(f.gx[f.index(x, y)] == gx);
      CHECK(f.gy[f.index(x, y)] == gy);
    }

  // vertical step: black | red at column 4. Sobel gives 4*255 on both sides.
  Frame step(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) step.at(x, y) = {255, 0, 0};
  const auto s = color_gradient(step);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const double want = (x == 3 || x == 4) ? 4.0 * 255.0 : 0.0;
      CHECK(s.gx[s.index(x, y)] == want);
      CHECK(s.gy[s.index(x, y)] == 0.0);
    }
}

TEST_CASE("color_gradient picks the strongest channel, R then G then B on ties") {
  Frame f(5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 3; x < 5; ++x) f.at(x, y) = {10, 50, 50};
  const auto g = color_gradient(f);
  CHECK(g.gx[g.index(2, 2)] == 4.0 * 50.0);
  Frame t(5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 3; x < 5; ++x) t.at(x, y) = {0, 0, 0};
  for (int y = 3; y < 5; ++y)
    for (int x = 0; x < 5; ++x) t.at(x, y).b = 100;  // horizontal edge in B
  for (int y = 0; y < 5; ++y)
    for (int x = 3; x < 5; ++x) t.at(x, y).g = 100;  // vertical edge in G, same strength
  const auto h = color_gradient(t);
  // at (2,2) both G and B have |grad| = 400 (plus cross terms are zero there)
  CHECK(h.gx[h.index(2, 2)] != 0.0);
  CHECK(h.gy[h.index(2, 2)] == 0.0);
}

TEST_CASE("gradient field invariants") {
  Rng rng(12);
  const auto f = color_gradient(testutil::random_frame(rng, 12, 9));
  for (std::size_t i = 0; i < f.gx.size(); ++i) {
    CHECK(f.magnitude[i] == doctest::Approx(std::hypot(f.gx[i], f.gy[i])).epsilon(1e-14));
    CHECK(f.orientation[i] == quantize(f.gx[i], f.gy[i]));
  }
  CHECK(quantize(1, 0) == Orientation::Deg0);
  CHECK(quantize(1, 1) == Orientation::Deg45);
  CHECK(quantize(0, 1) == Orientation::Deg90);
  CHECK(quantize(-1, 1) == Orientation::Deg135);
  CHECK(quantize(-1, 0) == Orientation::Deg0);
  CHECK(quantize(-1, -1) == Orientation::Deg45);
}

TEST_CASE("nms_hysteresis examples") {
  GradientField z(8, 8);
  CHECK(nms_hysteresis(z, 1.0, 2.0).points.empty());

  GradientField one(8, 8);
  const auto i = one.index(4, 3);
  one.gx[i] = 5.0;
  one.magnitude[i] = 5.0;
  const auto e = nms_hysteresis(one, 1.0, 2.0);
  REQUIRE(e.points.size() == 1);
  CHECK(e.points[0] == Point{4, 3});

  // the border ring never survives
  GradientField border(8, 8);
  border.gx[border.index(0, 3)] = border.magnitude[border.index(0, 3)] = 9.0;
  CHECK(nms_hysteresis(border, 1.0, 2.0).points.empty());
  CHECK_ERROR(nms_hysteresis(z, 3.0, 2.0), "ConfigError");
}

TEST_CASE("nms_hysteresis matches the reference on random fields") {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const auto f = random_field(rng, 16, 16);
    const double high = rng.uniform(2.0, 12.0);
    const double low = rng.uniform(0.0, high);
    const auto got = nms_hysteresis(f, low, high);
    const std::set<Point> got_set(got.points.begin(), got.points.end());
    CHECK(got_set == oracle::canny_reference(f, low, high));
    CHECK(std::is_sorted(got.points.begin(), got.points.end()));
    CHECK(got_set.size() == got.points.size());
  }
}

TEST_CASE("magnitude_percentile is nearest-rank over nonzero magnitudes") {
  GradientField f(5, 1);
  f.magnitude = {0.0, 4.0, 1.0, 3.0, 2.0};
  CHECK(magnitude_percentile(f, 0.9) == 4.0);
  CHECK(magnitude_percentile(f, 0.5) == 2.0);
  CHECK(magnitude_percentile(f, 0.25) == 1.0);
  CHECK(magnitude_percentile(GradientField(3, 3), 0.9) == 0.0);
}

TEST_CASE("detect_edges examples") {
  CannyParams p;
  CHECK(detect_edges(Frame(32, 32), p).points.empty());

  const auto sq = eval::generate_scene(eval::square_scene(32, 10, 1)).sequence.frames[0];
  const auto e = detect_edges(sq, p);
  CHECK(!e.points.empty());
  // the square occupies [11, 21) in both axes; every edge lies within one pixel of its boundary ring
  for (const auto& q : e.points) {
    const int dx = std::max({11 - q.x, q.x - 20, 0}), dy = std::max({11 - q.y, q.y - 20, 0});
    const bool outside_near = std::max(dx, dy) <= 1;
    const bool inside_near = q.x <= 12 || q.x >= 19 || q.y <= 12 || q.y >= 19;
    CHECK((outside_near && inside_near));
  }

  CannyParams high = p;
  high.high = 1e9;
  high.low = 1.0;
  CHECK(detect_edges(sq, high).points.empty());
}

TEST_CASE("raising high never adds edges") {
  const auto scene = eval::generate_scene(eval::three_part_scene(3, 4));
  for (const auto& f : scene.sequence.frames) {
    CannyParams p;
    p.low = 20.0;
    std::set<Point> prev;
    bool first = true;
    for (double hi : {30.0, 60.0, 120.0, 240.0, 480.0}) {
      p.high = hi;
      const auto e = detect_edges(f, p);
      const std::set<Point> cur(e.points.begin(), e.points.end());
      if (!first) CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      prev = cur;
      first = false;
    }
  }
}

TEST_CASE("edges stay in bounds and rotate with the frame") {
  Rng rng(41);
  for (int t = 0; t < 5; ++t) {
    // blocky random shapes so most gradients are axis-aligned or diagonal
    Frame f(24, 24);
    for (int k = 0; k < 3; ++k) {
      const int x0 = 2 + int(rng.below(14)), y0 = 2 + int(rng.below(14));
      const Rgb c{std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256))};
      for (int y = y0; y < y0 + 6; ++y)
        for (int x = x0; x < x0 + 6; ++x) f.at(x, y) = c;
    }
    CannyParams p;
    p.low = 30.0;
    p.high = 80.0;
    const auto e = detect_edges(f, p);
    for (const auto& q : e.points) CHECK((q.x > 0 && q.y > 0 && q.x < 23 && q.y < 23));

    const Frame r = rotate90(f);
    const auto er = detect_edges(r, p);
    // pixels whose orientation sits on a quantization boundary are excluded
    ChannelPlanes planes = split_channels(f);
    for (auto& pl : planes) pl = gaussian_smooth(pl, p.sigma);
    const auto field = color_gradient(planes);
    auto on_boundary = [&](int x, int y) {
      const double a = folded_angle_deg(field.gx[field.index(x, y)], field.gy[field.index(x, y)]);
      for (double b : {22.5, 67.5, 112.5, 157.5})
        if (std::abs(a - b) < 1e-6) return true;
      return false;
    };
    std::set<Point> mapped, rotated(er.points.begin(), er.points.end());
    for (const auto& q : e.points)
      if (!on_boundary(q.x, q.y)) mapped.insert({23 - q.y, q.x});
    std::set<Point> rotated_kept;
    for (const auto& q : rotated)
      if (!on_boundary(q.y, 23 - q.x)) rotated_kept.insert(q);
    CHECK(mapped == rotated_kept);
  }
}
