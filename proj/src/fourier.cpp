#include "oodbench/fourier.hpp"

#include <cmath>
#include <string>

namespace oodbench::fft {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void require_pow2(int w, int h) {
  if (!is_power_of_two(w) || !is_power_of_two(h))
    throw ConfigError("fft2: dimensions must be powers of two, got " + std::to_string(w) +
                      "x" + std::to_string(h));
}

std::vector<int> bit_reversal(int n) {
  std::vector<int> rev(n, 0);
  int log2n = 0;
  while ((1 << log2n) < n) ++log2n;
  for (int i = 1; i < n; ++i) rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (log2n - 1));
  return rev;
}

/// Twiddles exp(sign * 2*pi*i * k / n) for k in [0, n/2).
std::vector<std::complex<double>> twiddles(int n, double sign) {
  std::vector<std::complex<double>> w(n / 2);
  for (int k = 0; k < n / 2; ++k) {
    const double a = sign * kTwoPi * k / n;
    w[k] = {std::cos(a), std::sin(a)};
  }
  return w;
}

/// In-place radix-2 transform of one line. Unnormalized in both directions.
void fft_line(std::complex<double>* a, int n, const std::vector<int>& rev,
              const std::vector<std::complex<double>>& w) {
  for (int i = 0; i < n; ++i) {
    if (i < rev[i]) std::swap(a[i], a[rev[i]]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len >> 1;
    const int step = n / len;
    for (int base = 0; base < n; base += len) {
      for (int k = 0; k < half; ++k) {
        const std::complex<double> u = a[base + k];
        const std::complex<double> v = a[base + k + half] * w[static_cast<std::size_t>(k) * step];
        a[base + k] = u + v;
        a[base + k + half] = u - v;
      }
    }
  }
}

ComplexImage2D transform2d(const ComplexImage2D& im, double sign) {
  require_pow2(im.width, im.height);
  ComplexImage2D out = im;

  const std::vector<int> rev_x = bit_reversal(im.width);
  const std::vector<std::complex<double>> w_x = twiddles(im.width, sign);
#pragma omp parallel for
  for (int y = 0; y < im.height; ++y) {
    fft_line(&out.data[static_cast<std::size_t>(y) * im.width], im.width, rev_x, w_x);
  }

  const std::vector<int> rev_y = bit_reversal(im.height);
  const std::vector<std::complex<double>> w_y = twiddles(im.height, sign);
#pragma omp parallel for
  for (int x = 0; x < im.width; ++x) {
    std::vector<std::complex<double>> col(im.height);
    for (int y = 0; y < im.height; ++y) col[y] = out.at(x, y);
    fft_line(col.data(), im.height, rev_y, w_y);
    for (int y = 0; y < im.height; ++y) out.at(x, y) = col[y];
  }
  return out;
}

}  // namespace

ComplexImage2D to_complex(const Image2D& im) {
  ComplexImage2D out(im.width, im.height);
  for (std::size_t i = 0; i < im.pixel_count(); ++i) out.data[i] = {im.data[i], 0.0};
  return out;
}

Image2D magnitude(const ComplexImage2D& im) {
  Image2D out(im.width, im.height);
  for (std::size_t i = 0; i < im.data.size(); ++i) out.data[i] = std::abs(im.data[i]);
  return out;
}

Image2D real_part(const ComplexImage2D& im) {
  Image2D out(im.width, im.height);
  for (std::size_t i = 0; i < im.data.size(); ++i) out.data[i] = im.data[i].real();
  return out;
}

ComplexImage2D fft2(const ComplexImage2D& im) { return transform2d(im, -1.0); }

ComplexImage2D fft2(const Image2D& im) { return transform2d(to_complex(im), -1.0); }

ComplexImage2D ifft2(const ComplexImage2D& im) {
  ComplexImage2D out = transform2d(im, 1.0);
  const double scale = 1.0 / (static_cast<double>(im.width) * im.height);
  for (auto& v : out.data) v *= scale;
  return out;
}

ComplexImage2D fftshift(const ComplexImage2D& im) {
  ComplexImage2D out(im.width, im.height);
  const int sx = im.width / 2;
  const int sy = im.height / 2;
  for (int y = 0; y < im.height; ++y) {
    const int yy = (y + sy) % im.height;
    for (int x = 0; x < im.width; ++x) {
      out.at((x + sx) % im.width, yy) = im.at(x, y);
    }
  }
  return out;
}

}  // namespace oodbench::fft
