#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oodbench/image.hpp"

namespace oodbench::metrics {

enum class Orientation { ErrorLike, SimilarityLike };

/// A per-pixel comparison map plus the bookkeeping needed to pool maps of
/// mixed polarity: similarity maps must be flipped exactly once before they
/// enter an anomaly average.
struct MetricMap {
  Image2D values;
  std::string metric;
  Orientation orientation = Orientation::ErrorLike;
  bool inverted = false;
};

/// Maps similarity-like values v to 1 - v; error-like maps pass through
/// unchanged. Either way the result is flagged, and inverting twice throws.
MetricMap invert_map(const MetricMap& map);

struct SsimConfig {
  int window = 7;
  double c1 = 1e-4;
  double c2 = 9e-4;
  double c3 = 4.5e-4;  // c2 / 2
};

struct SsimMaps {
  MetricMap contrast, luminance, structure, ssim;
};

/// Windowed similarity maps from uniform-window population statistics with
/// reflect padding. Negative variances and covariance clip to zero, which
/// keeps every map in (0, 1].
SsimMaps ssim_maps(const Image2D& x, const Image2D& xhat, const SsimConfig& cfg = {});

MetricMap abs_error_map(const Image2D& x, const Image2D& xhat);

struct FeatureBankConfig {
  std::vector<int> channels{4, 8, 16};
  std::uint64_t seed = 0;
};

/// Regulariser added to the feature-vector norm before channel
/// normalisation. Keeps near-silent locations (flat background on both
/// sides) from being blown up to full unit vectors by noise.
inline constexpr double kFeatureNormEps = 2e-1;

/// Fixed random convolutional feature extractor: per stage a 3x3 convolution
/// (weights N(0, 2/fan_in)) and ReLU, with 2x2 mean pooling between stages.
class FeatureBank {
 public:
  explicit FeatureBank(const FeatureBankConfig& cfg);

  int n_stages() const { return static_cast<int>(stages_.size()); }
  int stage_channels(int s) const { return stages_[s].out_ch; }
  /// Weight layout: [out][in][ky][kx].
  const std::vector<double>& stage_weights(int s) const { return stages_[s].w; }

  /// Feature maps per stage; stage s is computed at 1/2^s resolution, so
  /// image sides must be divisible by 2^(n_stages - 1).
  std::vector<std::vector<Image2D>> features(const Image2D& im) const;

 private:
  struct Stage {
    int in_ch, out_ch;
    std::vector<double> w;
  };
  std::vector<Stage> stages_;
};

/// Distance between channel-unit-normalized features, squared and summed over
/// channels, upsampled per stage to full resolution and averaged. Raw scale;
/// calibrate before pooling with other metrics.
MetricMap perceptual_map(const Image2D& x, const Image2D& xhat, const FeatureBank& bank);

/// Percentile with linear interpolation between order statistics.
double percentile(std::vector<double> values, double pct);

/// Divides by the calibration constant and clips to [0, 1].
MetricMap calibrate_error_map(const MetricMap& raw, double divisor);

}  // namespace oodbench::metrics
