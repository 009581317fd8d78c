#include "oodbench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "oodbench/imgops.hpp"
#include "oodbench/rng.hpp"

namespace oodbench::metrics {

MetricMap invert_map(const MetricMap& map) {
  if (map.inverted)
    throw ConfigError("invert_map: map '" + map.metric + "' is already inverted");
  MetricMap out;
  out.metric = map.metric;
  out.orientation = map.orientation;
  out.inverted = true;
  if (map.orientation == Orientation::ErrorLike) {
    out.values = map.values;
    return out;
  }
  out.values = Image2D(map.values.width, map.values.height);
  for (std::size_t i = 0; i < map.values.pixel_count(); ++i)
    out.values.data[i] = 1.0 - map.values.data[i];
  return out;
}

SsimMaps ssim_maps(const Image2D& x, const Image2D& xhat, const SsimConfig& cfg) {
  if (!x.same_size(xhat)) throw ConfigError("ssim_maps: image sizes differ");
  if (cfg.window <= 0 || cfg.window % 2 == 0)
    throw ConfigError("ssim_maps: window must be odd and positive");

  const std::vector<double> box = img::box_kernel(cfg.window);
  Image2D xx(x.width, x.height), yy(x.width, x.height), xy(x.width, x.height);
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    xx.data[i] = x.data[i] * x.data[i];
    yy.data[i] = xhat.data[i] * xhat.data[i];
    xy.data[i] = x.data[i] * xhat.data[i];
  }
  const Image2D mx = img::convolve2d_separable(x, box);
  const Image2D my = img::convolve2d_separable(xhat, box);
  const Image2D mxx = img::convolve2d_separable(xx, box);
  const Image2D myy = img::convolve2d_separable(yy, box);
  const Image2D mxy = img::convolve2d_separable(xy, box);

  SsimMaps maps;
  maps.contrast = {Image2D(x.width, x.height), "contrast", Orientation::SimilarityLike, false};
  maps.luminance = {Image2D(x.width, x.height), "luminance", Orientation::SimilarityLike, false};
  maps.structure = {Image2D(x.width, x.height), "structure", Orientation::SimilarityLike, false};
  maps.ssim = {Image2D(x.width, x.height), "ssim", Orientation::SimilarityLike, false};

#pragma omp parallel for
  for (long long i = 0; i < static_cast<long long>(x.pixel_count()); ++i) {
    const double ux = mx.data[i], uy = my.data[i];
    const double varx = std::max(0.0, mxx.data[i] - ux * ux);
    const double vary = std::max(0.0, myy.data[i] - uy * uy);
    const double cov = std::max(0.0, mxy.data[i] - ux * uy);
    const double sdx = std::sqrt(varx), sdy = std::sqrt(vary);
    const double c = (2.0 * sdx * sdy + cfg.c2) / (varx + vary + cfg.c2);
    const double l = (2.0 * ux * uy + cfg.c1) / (ux * ux + uy * uy + cfg.c1);
    const double s = (cov + cfg.c3) / (sdx * sdy + cfg.c3);
    maps.contrast.values.data[i] = c;
    maps.luminance.values.data[i] = l;
    maps.structure.values.data[i] = s;
    maps.ssim.values.data[i] = c * l * s;
  }
  return maps;
}

MetricMap abs_error_map(const Image2D& x, const Image2D& xhat) {
  if (!x.same_size(xhat)) throw ConfigError("abs_error_map: image sizes differ");
  MetricMap out{Image2D(x.width, x.height), "abs_error", Orientation::ErrorLike, false};
  for (std::size_t i = 0; i < x.pixel_count(); ++i)
    out.values.data[i] = std::fabs(x.data[i] - xhat.data[i]);
  return out;
}

FeatureBank::FeatureBank(const FeatureBankConfig& cfg) {
  if (cfg.channels.empty()) throw ConfigError("FeatureBank: need at least one stage");
  int in_ch = 1;
  for (std::size_t s = 0; s < cfg.channels.size(); ++s) {
    const int out_ch = cfg.channels[s];
    if (out_ch <= 0) throw ConfigError("FeatureBank: stage channels must be positive");
    Stage st;
    st.in_ch = in_ch;
    st.out_ch = out_ch;
    st.w.resize(static_cast<std::size_t>(out_ch) * in_ch * 9);
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * 9.0));
    rng::SplitMix64 g = rng::stream(cfg.seed, "feature-bank", s);
    for (double& w : st.w) w = g.gauss(0.0, stddev);
    stages_.push_back(std::move(st));
    in_ch = out_ch;
  }
}

namespace {

/// 3x3 convolution over a multi-channel input with reflect padding, ReLU'd.
std::vector<Image2D> conv3x3_relu(const std::vector<Image2D>& in, int out_ch,
                                  const std::vector<double>& w) {
  const int W = in[0].width, H = in[0].height;
  const int in_ch = static_cast<int>(in.size());
  std::vector<Image2D> out(out_ch, Image2D(W, H));
#pragma omp parallel for
  for (int o = 0; o < out_ch; ++o) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int c = 0; c < in_ch; ++c) {
          const double* wc = &w[(static_cast<std::size_t>(o) * in_ch + c) * 9];
          for (int ky = -1; ky <= 1; ++ky) {
            const int yy = img::reflect_index(y + ky, H);
            for (int kx = -1; kx <= 1; ++kx) {
              acc += wc[(ky + 1) * 3 + (kx + 1)] *
                     in[c].at(img::reflect_index(x + kx, W), yy);
            }
          }
        }
        out[o].at(x, y) = std::max(0.0, acc);
      }
    }
  }
  return out;
}

std::vector<Image2D> mean_pool2(const std::vector<Image2D>& in) {
  const int W = in[0].width, H = in[0].height;
  if (W % 2 != 0 || H % 2 != 0)
    throw ConfigError("FeatureBank: image sides must stay even across pooling");
  std::vector<Image2D> out;
  out.reserve(in.size());
  for (const Image2D& ch : in) {
    Image2D p(W / 2, H / 2);
    for (int y = 0; y < H / 2; ++y) {
      for (int x = 0; x < W / 2; ++x) {
        p.at(x, y) = 0.25 * (ch.at(2 * x, 2 * y) + ch.at(2 * x + 1, 2 * y) +
                             ch.at(2 * x, 2 * y + 1) + ch.at(2 * x + 1, 2 * y + 1));
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Bilinear upsample with half-pixel center alignment.
Image2D upsample_to(const Image2D& im, int W, int H) {
  Image2D out(W, H);
  const double sx = static_cast<double>(im.width) / W;
  const double sy = static_cast<double>(im.height) / H;
#pragma omp parallel for
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      out.at(x, y) = img::bilinear_sample(im, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<Image2D>> FeatureBank::features(const Image2D& im) const {
  std::vector<std::vector<Image2D>> per_stage;
  std::vector<Image2D> cur{im};
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    if (s > 0) cur = mean_pool2(cur);
    cur = conv3x3_relu(cur, stages_[s].out_ch, stages_[s].w);
    per_stage.push_back(cur);
  }
  return per_stage;
}

MetricMap perceptual_map(const Image2D& x, const Image2D& xhat, const FeatureBank& bank) {
  if (!x.same_size(xhat)) throw ConfigError("perceptual_map: image sizes differ");
  const auto fx = bank.features(x);
  const auto fy = bank.features(xhat);

  Image2D acc(x.width, x.height, 0.0);
  for (int s = 0; s < bank.n_stages(); ++s) {
    const std::vector<Image2D>& a = fx[s];
    const std::vector<Image2D>& b = fy[s];
    const int W = a[0].width, H = a[0].height;
    const int ch = static_cast<int>(a.size());
    Image2D d(W, H);
#pragma omp parallel for
    for (int y = 0; y < H; ++y) {
      for (int x2 = 0; x2 < W; ++x2) {
        double na = 0.0, nb = 0.0;
        for (int c = 0; c < ch; ++c) {
          na += a[c].at(x2, y) * a[c].at(x2, y);
          nb += b[c].at(x2, y) * b[c].at(x2, y);
        }
        na = std::sqrt(na) + kFeatureNormEps;
        nb = std::sqrt(nb) + kFeatureNormEps;
        double dist = 0.0;
        for (int c = 0; c < ch; ++c) {
          const double diff = a[c].at(x2, y) / na - b[c].at(x2, y) / nb;
          dist += diff * diff;
        }
        d.at(x2, y) = dist;
      }
    }
    const Image2D up = s == 0 ? d : upsample_to(d, x.width, x.height);
    for (std::size_t i = 0; i < acc.pixel_count(); ++i) acc.data[i] += up.data[i];
  }
  const double inv = 1.0 / bank.n_stages();
  for (double& v : acc.data) v *= inv;
  return {std::move(acc), "perceptual", Orientation::ErrorLike, false};
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ConfigError("percentile: empty sample");
  if (!(pct >= 0.0 && pct <= 100.0)) throw ConfigError("percentile: pct out of [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

MetricMap calibrate_error_map(const MetricMap& raw, double divisor) {
  if (raw.orientation != Orientation::ErrorLike)
    throw ConfigError("calibrate_error_map: expects an error-like map");
  if (!(divisor > 0.0)) throw NumericError("calibrate_error_map: divisor must be positive");
  MetricMap out;
  out.metric = raw.metric;
  out.orientation = raw.orientation;
  out.inverted = raw.inverted;
  out.values = Image2D(raw.values.width, raw.values.height);
  for (std::size_t i = 0; i < raw.values.pixel_count(); ++i)
    out.values.data[i] = std::clamp(raw.values.data[i] / divisor, 0.0, 1.0);
  return out;
}

}  // namespace oodbench::metrics
