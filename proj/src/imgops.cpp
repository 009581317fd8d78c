#include "oodbench/imgops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oodbench::img {

double min_value(const Image2D& im) {
  return *std::min_element(im.data.begin(), im.data.end());
}

double max_value(const Image2D& im) {
  return *std::max_element(im.data.begin(), im.data.end());
}

double mean_value(const Image2D& im) {
  double s = 0.0;
  for (double v : im.data) s += v;
  return s / static_cast<double>(im.pixel_count());
}

Image2D normalize_minmax(const Image2D& im) {
  const double lo = min_value(im);
  const double hi = max_value(im);
  if (!(hi > lo)) throw DataError("normalize_minmax: constant image has no range");
  Image2D out(im.width, im.height);
  const double range = hi - lo;
  // Division keeps the endpoints exact: (hi-lo)/(hi-lo) is 1.0 in IEEE,
  // a precomputed reciprocal is not.
#pragma omp parallel for
  for (long long i = 0; i < static_cast<long long>(im.pixel_count()); ++i) {
    out.data[i] = (im.data[i] - lo) / range;
  }
  return out;
}

Mask2D foreground_mask(const Image2D& im) {
  Mask2D m(im.width, im.height);
  for (std::size_t i = 0; i < im.pixel_count(); ++i) m.bits[i] = im.data[i] != 0.0 ? 1 : 0;
  return m;
}

Mask2D erode_mask(const Mask2D& mask, double radius_px) {
  if (radius_px < 0.0) throw ConfigError("erode_mask: radius must be non-negative");
  const int r = static_cast<int>(std::floor(radius_px));
  const double r2 = radius_px * radius_px;
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r2) offsets.emplace_back(dx, dy);

  Mask2D out(mask.width, mask.height);
#pragma omp parallel for
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool keep = mask.at(x, y) != 0;
      for (std::size_t k = 0; keep && k < offsets.size(); ++k) {
        const int xx = x + offsets[k].first;
        const int yy = y + offsets[k].second;
        keep = xx >= 0 && xx < mask.width && yy >= 0 && yy < mask.height &&
               mask.at(xx, yy) != 0;
      }
      out.at(x, y) = keep ? 1 : 0;
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian_kernel: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

std::vector<double> box_kernel(int n) {
  if (n <= 0 || n % 2 == 0) throw ConfigError("box_kernel: length must be odd and positive");
  return std::vector<double>(n, 1.0 / n);
}

Image2D convolve2d_separable(const Image2D& im, const std::vector<double>& kernel) {
  const int klen = static_cast<int>(kernel.size());
  if (klen == 0 || klen % 2 == 0)
    throw ConfigError("convolve2d_separable: kernel length must be odd");
  if (klen > 2 * std::min(im.width, im.height))
    throw ConfigError("convolve2d_separable: kernel length " + std::to_string(klen) +
                      " exceeds twice the shorter image side");
  const int radius = klen / 2;

  Image2D tmp(im.width, im.height);
#pragma omp parallel for
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        acc += kernel[t + radius] * im.at(reflect_index(x + t, im.width), y);
      }
      tmp.at(x, y) = acc;
    }
  }

  Image2D out(im.width, im.height);
#pragma omp parallel for
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        acc += kernel[t + radius] * tmp.at(x, reflect_index(y + t, im.height));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

double bilinear_sample(const Image2D& im, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int x0 = std::clamp(static_cast<int>(fx), 0, im.width - 1);
  const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, im.width - 1);
  const int y0 = std::clamp(static_cast<int>(fy), 0, im.height - 1);
  const int y1 = std::clamp(static_cast<int>(fy) + 1, 0, im.height - 1);
  return (1.0 - ay) * ((1.0 - ax) * im.at(x0, y0) + ax * im.at(x1, y0)) +
         ay * ((1.0 - ax) * im.at(x0, y1) + ax * im.at(x1, y1));
}

}  // namespace oodbench::img
