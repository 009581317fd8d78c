#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "oodbench/common.hpp"

namespace oodbench {

/// Dense row-major grayscale image. Values are doubles; pipeline images live
/// in [0, 1] but intermediates (k-space magnitudes, raw metric maps) may not.
struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image2D() = default;
  Image2D(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) throw ConfigError("Image2D: dimensions must be positive");
  }

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  std::size_t pixel_count() const { return data.size(); }
  bool same_size(const Image2D& o) const { return width == o.width && height == o.height; }
};

/// Binary mask with the same layout as Image2D.
struct Mask2D {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask2D() = default;
  Mask2D(int w, int h, bool fill = false)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {
    if (w <= 0 || h <= 0) throw ConfigError("Mask2D: dimensions must be positive");
  }

  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }

  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
  }
  bool same_size(const Mask2D& o) const { return width == o.width && height == o.height; }
};

}  // namespace oodbench
