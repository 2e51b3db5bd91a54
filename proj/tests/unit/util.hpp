#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>

#include "wildseg/error.hpp"
#include "wildseg/image.hpp"
#include "wildseg/rng.hpp"

// Runs expr and checks it throws wildseg::Error with the given name.
#define CHECK_ERROR(expr, expected_name)                                  \
  do {                                                                    \
    std::string got_ = "<no throw>";                                      \
    try {                                                                 \
      (void)(expr);                                                       \
    } catch (const wildseg::Error& e_) {                                  \
      got_ = e_.name();                                                   \
    }                                                                     \
    CHECK(got_ == std::string(expected_name));                            \
  } while (0)

namespace testutil {

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wildseg_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline wildseg::Frame random_frame(wildseg::Rng& rng, int w, int h) {
  wildseg::Frame f(w, h);
  for (auto& px : f.data) {
    px.r = static_cast<std::uint8_t>(rng.below(256));
    px.g = static_cast<std::uint8_t>(rng.below(256));
    px.b = static_cast<std::uint8_t>(rng.below(256));
  }
  return f;
}

inline wildseg::ForegroundMask random_mask(wildseg::Rng& rng, int w, int h) {
  wildseg::ForegroundMask m(w, h);
  for (auto& v : m.data) v = static_cast<std::uint8_t>(rng.below(2));
  return m;
}

}  // namespace testutil
