#pragma once

#include <complex>
#include <vector>

#include "oodbench/image.hpp"

namespace oodbench::fft {

/// Row-major complex image used for k-space manipulation.
struct ComplexImage2D {
  int width = 0;
  int height = 0;
  std::vector<std::complex<double>> data;

  ComplexImage2D() = default;
  ComplexImage2D(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h) {
    if (w <= 0 || h <= 0) throw ConfigError("ComplexImage2D: dimensions must be positive");
  }

  std::complex<double>& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  const std::complex<double>& at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

ComplexImage2D to_complex(const Image2D& im);
Image2D magnitude(const ComplexImage2D& im);
Image2D real_part(const ComplexImage2D& im);

/// Unnormalized forward 2-D transform. Dimensions must be powers of two.
ComplexImage2D fft2(const ComplexImage2D& im);
ComplexImage2D fft2(const Image2D& im);

/// Inverse transform scaled by 1/(width*height), so ifft2(fft2(x)) == x.
ComplexImage2D ifft2(const ComplexImage2D& im);

/// Rolls the zero-frequency bin to the center. Self-inverse for even
/// dimensions.
ComplexImage2D fftshift(const ComplexImage2D& im);

}  // namespace oodbench::fft
