#include <cmath>
#include <complex>

#include "doctest.h"
#include "oodbench/fourier.hpp"
#include "oodbench/rng.hpp"

using namespace oodbench;
using fft::ComplexImage2D;

#include "oodbench/ref/reference.hpp"

namespace {

Image2D random_image(int w, int h, std::uint64_t seed) {
  Image2D im(w, h);
  rng::SplitMix64 g = rng::stream(seed, "fft-test");
  for (double& v : im.data) v = g.uniform(-1.0, 1.0);
  return im;
}

}  // namespace

TEST_CASE("fft2: matches naive DFT") {
  for (auto [w, h] : {std::pair{8, 8}, std::pair{16, 8}, std::pair{16, 16}}) {
    const Image2D im = random_image(w, h, 100 + w + h);
    const ComplexImage2D fast = fft::fft2(im);
    Image2D slow_re, slow_im;
    ref::dft2_naive(im, &slow_re, &slow_im);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        CHECK(std::fabs(fast.at(x, y).real() - slow_re.at(x, y)) < 1e-10);
        CHECK(std::fabs(fast.at(x, y).imag() - slow_im.at(x, y)) < 1e-10);
      }
    }
  }
}

TEST_CASE("ifft2: inverts fft2") {
  const Image2D im = random_image(32, 16, 55);
  const ComplexImage2D back = fft::ifft2(fft::fft2(im));
  for (std::size_t i = 0; i < im.pixel_count(); ++i) {
    CHECK(std::fabs(back.data[i].real() - im.data[i]) < 1e-12);
    CHECK(std::fabs(back.data[i].imag()) < 1e-12);
  }
}

TEST_CASE("ifft2: matches naive inverse DFT") {
  const Image2D re = random_image(8, 8, 60);
  const Image2D imp = random_image(8, 8, 61);
  ComplexImage2D k(8, 8);
  for (std::size_t i = 0; i < k.data.size(); ++i) k.data[i] = {re.data[i], imp.data[i]};
  const ComplexImage2D fast = fft::ifft2(k);
  Image2D slow_re, slow_im;
  ref::idft2_naive(re, imp, &slow_re, &slow_im);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      CHECK(std::fabs(fast.at(x, y).real() - slow_re.at(x, y)) < 1e-10);
      CHECK(std::fabs(fast.at(x, y).imag() - slow_im.at(x, y)) < 1e-10);
    }
  }
}

TEST_CASE("fft2: Parseval energy identity") {
  const Image2D im = random_image(16, 16, 70);
  const ComplexImage2D spec = fft::fft2(im);
  double e_space = 0, e_freq = 0;
  for (double v : im.data) e_space += v * v;
  for (const auto& c : spec.data) e_freq += std::norm(c);
  CHECK(e_space == doctest::Approx(e_freq / (16.0 * 16.0)).epsilon(1e-12));
}

TEST_CASE("fft2: linearity") {
  const Image2D a = random_image(8, 8, 80);
  const Image2D b = random_image(8, 8, 81);
  Image2D mix(8, 8);
  for (std::size_t i = 0; i < mix.pixel_count(); ++i)
    mix.data[i] = 2.5 * a.data[i] - 0.75 * b.data[i];
  const ComplexImage2D fa = fft::fft2(a);
  const ComplexImage2D fb = fft::fft2(b);
  const ComplexImage2D fm = fft::fft2(mix);
  for (std::size_t i = 0; i < fm.data.size(); ++i) {
    const std::complex<double> want = 2.5 * fa.data[i] - 0.75 * fb.data[i];
    CHECK(std::abs(fm.data[i] - want) < 1e-10);
  }
}

TEST_CASE("fft2: impulse and constant spectra") {
  Image2D delta(8, 8, 0.0);
  delta.at(0, 0) = 1.0;
  const ComplexImage2D fd = fft::fft2(delta);
  for (const auto& c : fd.data) {
    CHECK(c.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(c.imag()) < 1e-12);
  }

  const Image2D flat(8, 8, 0.3);
  const ComplexImage2D ff = fft::fft2(flat);
  CHECK(ff.at(0, 0).real() == doctest::Approx(0.3 * 64.0).epsilon(1e-12));
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      if (x == 0 && y == 0) continue;
      CHECK(std::abs(ff.at(x, y)) < 1e-12);
    }
  }
}

TEST_CASE("fftshift: moves DC to center and is self-inverse on even sizes") {
  const Image2D im = random_image(8, 16, 90);
  const ComplexImage2D spec = fft::fft2(im);
  const ComplexImage2D sh = fft::fftshift(spec);
  CHECK(sh.at(4, 8) == spec.at(0, 0));
  const ComplexImage2D back = fft::fftshift(sh);
  for (std::size_t i = 0; i < spec.data.size(); ++i) CHECK(back.data[i] == spec.data[i]);
}

TEST_CASE("fft2: rejects non-power-of-two dimensions") {
  CHECK_THROWS_AS(fft::fft2(Image2D(6, 8, 0.0)), ConfigError);
  CHECK_THROWS_AS(fft::fft2(Image2D(8, 12, 0.0)), ConfigError);
}
