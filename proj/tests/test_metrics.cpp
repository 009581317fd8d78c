#include <cmath>

#include "doctest.h"
#include "oodbench/dataset.hpp"
#include "oodbench/imgops.hpp"
#include "oodbench/metrics.hpp"
#include "oodbench/ref/reference.hpp"
#include "oodbench/rng.hpp"

using namespace oodbench;
using metrics::MetricMap;
using metrics::Orientation;

namespace {

Image2D random_image(int w, int h, std::uint64_t seed) {
  Image2D im(w, h);
  rng::SplitMix64 g = rng::stream(seed, "metric-test");
  for (double& v : im.data) v = g.next_double();
  return im;
}

}  // namespace

TEST_CASE("ssim maps: match the direct windowed oracle") {
  const Image2D x = random_image(24, 20, 1);
  const Image2D y = random_image(24, 20, 2);
  const metrics::SsimConfig cfg;
  const metrics::SsimMaps fast = metrics::ssim_maps(x, y, cfg);
  const ref::SsimRefMaps slow = ref::ssim_direct(x, y, cfg.window, cfg.c1, cfg.c2, cfg.c3);
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    CHECK(std::fabs(fast.contrast.values.data[i] - slow.contrast.data[i]) < 1e-12);
    CHECK(std::fabs(fast.luminance.values.data[i] - slow.luminance.data[i]) < 1e-12);
    CHECK(std::fabs(fast.structure.values.data[i] - slow.structure.data[i]) < 1e-12);
    CHECK(std::fabs(fast.ssim.values.data[i] - slow.ssim.data[i]) < 1e-12);
  }
}

TEST_CASE("ssim maps: identical inputs score one everywhere") {
  const Image2D x = random_image(16, 16, 3);
  const metrics::SsimMaps maps = metrics::ssim_maps(x, x);
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    CHECK(maps.contrast.values.data[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(maps.luminance.values.data[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(maps.structure.values.data[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(maps.ssim.values.data[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ssim maps: values stay in (0, 1] for [0,1] inputs") {
  const Image2D x = random_image(20, 20, 4);
  const Image2D y = random_image(20, 20, 5);
  const metrics::SsimMaps maps = metrics::ssim_maps(x, y);
  for (const MetricMap* m : {&maps.contrast, &maps.luminance, &maps.structure, &maps.ssim}) {
    CHECK(m->orientation == Orientation::SimilarityLike);
    for (double v : m->values.data) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("ssim maps: size mismatch and even windows rejected") {
  CHECK_THROWS_AS(metrics::ssim_maps(Image2D(8, 8, 0.1), Image2D(8, 9, 0.1)), ConfigError);
  metrics::SsimConfig cfg;
  cfg.window = 6;
  CHECK_THROWS_AS(metrics::ssim_maps(Image2D(8, 8, 0.1), Image2D(8, 8, 0.1), cfg),
                  ConfigError);
}

TEST_CASE("invert: similarity flips, error-like passes, twice throws") {
  MetricMap sim{Image2D(4, 4, 0.25), "ssim", Orientation::SimilarityLike, false};
  const MetricMap flipped = metrics::invert_map(sim);
  CHECK(flipped.inverted);
  for (double v : flipped.values.data) CHECK(v == doctest::Approx(0.75));

  MetricMap err{Image2D(4, 4, 0.4), "abs_error", Orientation::ErrorLike, false};
  const MetricMap passed = metrics::invert_map(err);
  CHECK(passed.inverted);
  for (double v : passed.values.data) CHECK(v == doctest::Approx(0.4));

  CHECK_THROWS_AS(metrics::invert_map(flipped), ConfigError);
  CHECK_THROWS_AS(metrics::invert_map(passed), ConfigError);
}

TEST_CASE("abs error map: plain absolute difference") {
  Image2D x(3, 1, 0.0);
  Image2D y(3, 1, 0.0);
  x.data = {0.2, 0.5, 0.9};
  y.data = {0.5, 0.5, 0.1};
  const MetricMap m = metrics::abs_error_map(x, y);
  CHECK(m.orientation == Orientation::ErrorLike);
  CHECK(m.values.data[0] == doctest::Approx(0.3));
  CHECK(m.values.data[1] == doctest::Approx(0.0));
  CHECK(m.values.data[2] == doctest::Approx(0.8));
}

TEST_CASE("feature bank: seeded weights, stage geometry, init scale") {
  metrics::FeatureBankConfig cfg;
  cfg.seed = 5;
  const metrics::FeatureBank a(cfg);
  const metrics::FeatureBank b(cfg);
  REQUIRE(a.n_stages() == 3);
  for (int s = 0; s < 3; ++s) CHECK(a.stage_weights(s) == b.stage_weights(s));

  cfg.seed = 6;
  const metrics::FeatureBank c(cfg);
  CHECK(a.stage_weights(0) != c.stage_weights(0));

  // Stage weight spread tracks sqrt(2 / fan_in).
  const int fan_in[3] = {1 * 9, 4 * 9, 8 * 9};
  for (int s = 0; s < 3; ++s) {
    const auto& w = a.stage_weights(s);
    double s2 = 0.0;
    for (double v : w) s2 += v * v;
    const double sd = std::sqrt(s2 / static_cast<double>(w.size()));
    const double want = std::sqrt(2.0 / fan_in[s]);
    CHECK(sd == doctest::Approx(want).epsilon(0.35));
  }

  const Image2D im = random_image(32, 32, 7);
  const auto feats = a.features(im);
  REQUIRE(feats.size() == 3);
  CHECK(feats[0].size() == 4);
  CHECK(feats[1].size() == 8);
  CHECK(feats[2].size() == 16);
  CHECK(feats[0][0].width == 32);
  CHECK(feats[1][0].width == 16);
  CHECK(feats[2][0].width == 8);
  for (const auto& stage : feats)
    for (const auto& ch : stage)
      for (double v : ch.data) CHECK(v >= 0.0);  // ReLU output
}

TEST_CASE("perceptual map: zero for identical inputs, symmetric otherwise") {
  metrics::FeatureBankConfig cfg;
  cfg.seed = 11;
  const metrics::FeatureBank bank(cfg);
  const Image2D x = random_image(16, 16, 12);
  const Image2D y = random_image(16, 16, 13);

  const MetricMap same = metrics::perceptual_map(x, x, bank);
  CHECK(same.orientation == Orientation::ErrorLike);
  for (double v : same.values.data) CHECK(v == 0.0);

  const MetricMap xy = metrics::perceptual_map(x, y, bank);
  const MetricMap yx = metrics::perceptual_map(y, x, bank);
  for (std::size_t i = 0; i < xy.values.pixel_count(); ++i)
    CHECK(xy.values.data[i] == doctest::Approx(yx.values.data[i]).epsilon(1e-12));
  double total = 0.0;
  for (double v : xy.values.data) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total > 0.0);
}

TEST_CASE("perceptual map: single-stage output matches a hand-rolled trace") {
  metrics::FeatureBankConfig cfg;
  cfg.channels = {3};
  cfg.seed = 21;
  const metrics::FeatureBank bank(cfg);
  const Image2D x = random_image(8, 8, 22);
  const Image2D y = random_image(8, 8, 23);
  const MetricMap got = metrics::perceptual_map(x, y, bank);

  const auto& w = bank.stage_weights(0);
  auto reflect = [](int i, int n) { return i < 0 ? -i - 1 : (i >= n ? 2 * n - 1 - i : i); };
  auto feats = [&](const Image2D& im, int o, int px, int py) {
    double acc = 0.0;
    for (int ky = -1; ky <= 1; ++ky)
      for (int kx = -1; kx <= 1; ++kx)
        acc += w[o * 9 + (ky + 1) * 3 + (kx + 1)] *
               im.at(reflect(px + kx, 8), reflect(py + ky, 8));
    return std::max(0.0, acc);
  };
  for (int py = 0; py < 8; ++py) {
    for (int px = 0; px < 8; ++px) {
      double fx[3], fy[3], nx = 0, ny = 0;
      for (int o = 0; o < 3; ++o) {
        fx[o] = feats(x, o, px, py);
        fy[o] = feats(y, o, px, py);
        nx += fx[o] * fx[o];
        ny += fy[o] * fy[o];
      }
      nx = std::sqrt(nx) + metrics::kFeatureNormEps;
      ny = std::sqrt(ny) + metrics::kFeatureNormEps;
      double want = 0.0;
      for (int o = 0; o < 3; ++o) {
        const double d = fx[o] / nx - fy[o] / ny;
        want += d * d;
      }
      CHECK(got.values.at(px, py) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("perceptual map: faint noise on a silent region stays near zero") {
  metrics::FeatureBankConfig cfg;
  cfg.seed = 5;
  const metrics::FeatureBank bank(cfg);
  const Image2D x(16, 16, 0.0);
  Image2D y(16, 16, 0.0);
  rng::SplitMix64 g = rng::stream(6, "halo");
  for (double& v : y.data) v = 1e-4 * g.next_double();
  const MetricMap m = metrics::perceptual_map(x, y, bank);
  for (double v : m.values.data) CHECK(v < 1e-3);
}

TEST_CASE("percentile: linear interpolation and endpoints") {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(metrics::percentile(v, 0.0) == doctest::Approx(1.0));
  CHECK(metrics::percentile(v, 100.0) == doctest::Approx(4.0));
  CHECK(metrics::percentile(v, 50.0) == doctest::Approx(2.5));
  CHECK(metrics::percentile(v, 25.0) == doctest::Approx(1.75));
  CHECK(metrics::percentile({7.0}, 99.5) == doctest::Approx(7.0));
  CHECK_THROWS_AS(metrics::percentile({}, 50.0), ConfigError);
  CHECK_THROWS_AS(metrics::percentile(v, 101.0), ConfigError);
}

TEST_CASE("calibrate: scales then clips to [0, 1]") {
  MetricMap raw{Image2D(2, 1, 0.0), "perceptual", Orientation::ErrorLike, false};
  raw.values.data = {0.5, 3.0};
  const MetricMap cal = metrics::calibrate_error_map(raw, 2.0);
  CHECK(cal.values.data[0] == doctest::Approx(0.25));
  CHECK(cal.values.data[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(metrics::calibrate_error_map(raw, 0.0), NumericError);
  MetricMap sim{Image2D(2, 1, 0.5), "ssim", Orientation::SimilarityLike, false};
  CHECK_THROWS_AS(metrics::calibrate_error_map(sim, 1.0), ConfigError);
}
