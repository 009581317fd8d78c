#pragma once

#include <vector>

#include "oodbench/image.hpp"

namespace oodbench::img {

/// Mirror an out-of-range index back into [0, n). Reflection is about the
/// array edge (no repeated edge sample): -1 -> 0, -2 -> 1, n -> n-1.
inline int reflect_index(int i, int n) {
  if (i < 0) i = -i - 1;
  if (i >= n) i = 2 * n - 1 - i;
  return i;
}

double min_value(const Image2D& im);
double max_value(const Image2D& im);
double mean_value(const Image2D& im);

/// Affine rescale so min maps to 0 and max to 1. Constant images are
/// rejected because the rescale is undefined.
Image2D normalize_minmax(const Image2D& im);

/// Mask of strictly nonzero pixels.
Mask2D foreground_mask(const Image2D& im);

/// Binary erosion with a disk of the given radius. A pixel survives when
/// every integer offset with dx*dx + dy*dy <= r*r lands on a set in-bounds
/// pixel, so set pixels near the border are cleared.
Mask2D erode_mask(const Mask2D& mask, double radius_px);

/// Normalized Gaussian tap weights with radius ceil(3*sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Uniform averaging kernel of odd length n.
std::vector<double> box_kernel(int n);

/// Separable 2-D convolution (rows then columns) with reflect padding.
/// The kernel must have odd length no longer than twice the shorter
/// image side, so one reflection always suffices.
Image2D convolve2d_separable(const Image2D& im, const std::vector<double>& kernel);

/// Bilinear interpolation at a continuous position. Coordinates are
/// clamped to the valid range, so results stay within the neighbor values.
double bilinear_sample(const Image2D& im, double x, double y);

}  // namespace oodbench::img
