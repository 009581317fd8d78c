#include "oodbench/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "oodbench/fourier.hpp"
#include "oodbench/imgops.hpp"
#include "oodbench/rng.hpp"

namespace oodbench::art {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kReferenceSize = 256;

struct FamilyName {
  Family family;
  const char* name;
};

constexpr FamilyName kFamilyNames[] = {
    {Family::CircleHard, "circle_hard"},   {Family::CircleSmooth, "circle_smooth"},
    {Family::BlackStripe, "black_stripe"}, {Family::PatchSwap, "patch_swap"},
    {Family::Blur, "blur"},                {Family::Noise, "noise"},
    {Family::Elastic, "elastic"},          {Family::Motion, "motion"},
    {Family::BiasField, "bias_field"},     {Family::Ghosting, "ghosting"},
    {Family::Spike, "spike"},
};

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  }
  return v;
}

double geometry_scale(int image_size) {
  return static_cast<double>(image_size) / kReferenceSize;
}

rng::SplitMix64 artifact_stream(const ArtifactParams& p) {
  return rng::stream(p.seed, family_name(p.family));
}

ArtifactResult make_global(Image2D im) {
  Mask2D empty(im.width, im.height, false);
  return {renormalize_global(im), std::move(empty)};
}

// Local families -------------------------------------------------------------

/// Circle center is drawn uniformly from the foreground eroded by the
/// radius, so the painted disk never leaves the body. Draws: center index.
ArtifactResult add_circle(const Image2D& im, double radius, double intensity, bool smooth,
                          std::uint64_t seed, Family family) {
  if (!(radius > 0.0)) throw ConfigError("add_circle: radius must be positive");
  const Mask2D fg = img::foreground_mask(im);
  const Mask2D allowed = img::erode_mask(fg, radius);
  std::vector<std::size_t> centers;
  for (std::size_t i = 0; i < allowed.bits.size(); ++i) {
    if (allowed.bits[i]) centers.push_back(i);
  }
  if (centers.empty())
    throw DataError("add_circle: no valid center after eroding by radius " +
                    std::to_string(radius));

  ArtifactParams key{family, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);
  const std::size_t pick = centers[g.below(centers.size())];
  const int cx = static_cast<int>(pick % im.width);
  const int cy = static_cast<int>(pick / im.width);

  ArtifactResult res{im, Mask2D(im.width, im.height, false)};
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      const double d = std::sqrt(static_cast<double>(x - cx) * (x - cx) +
                                 static_cast<double>(y - cy) * (y - cy));
      double cover;
      if (smooth) {
        cover = std::clamp(radius - d + 0.5, 0.0, 1.0);
      } else {
        cover = d <= radius ? 1.0 : 0.0;
      }
      // The mask is the support of the coverage raster, so the smooth
      // variant's anti-aliased rim is ground truth too.
      if (cover > 0.0) {
        res.image.at(x, y) = im.at(x, y) * (1.0 - cover) + intensity * cover;
        res.gt_mask.at(x, y) = 1;
      }
    }
  }
  return res;
}

/// Zeroes a full column (or row) of the given thickness placed between the
/// first and last nonzero column (or row). Draws: orientation, position.
ArtifactResult add_black_stripe(const Image2D& im, double thickness, std::uint64_t seed) {
  const int t = static_cast<int>(std::lround(thickness));
  if (t < 1) throw ConfigError("add_black_stripe: thickness must round to >= 1");

  ArtifactParams key{Family::BlackStripe, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);
  const bool vertical = g.below(2) == 0;

  int first = -1, last = -1;
  const int n = vertical ? im.width : im.height;
  for (int i = 0; i < n; ++i) {
    bool nonzero = false;
    const int m = vertical ? im.height : im.width;
    for (int j = 0; j < m && !nonzero; ++j) {
      nonzero = (vertical ? im.at(i, j) : im.at(j, i)) != 0.0;
    }
    if (nonzero) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) throw DataError("add_black_stripe: image has no foreground");
  const int slots = last - first + 1 - t + 1;
  if (slots < 1) throw DataError("add_black_stripe: stripe thicker than the foreground span");
  const int start = first + static_cast<int>(g.below(static_cast<std::uint64_t>(slots)));

  ArtifactResult res{im, Mask2D(im.width, im.height, false)};
  for (int i = start; i < start + t; ++i) {
    const int m = vertical ? im.height : im.width;
    for (int j = 0; j < m; ++j) {
      const int x = vertical ? i : j;
      const int y = vertical ? j : i;
      if (im.at(x, y) != 0.0) res.gt_mask.at(x, y) = 1;
      res.image.at(x, y) = 0.0;
    }
  }
  return res;
}

/// Swaps two disjoint square patches, each containing at least 10%
/// foreground. Draws: (x, y) pairs until both constraints hold.
ArtifactResult patch_swap(const Image2D& im, double patch_size, std::uint64_t seed) {
  const int s = static_cast<int>(std::lround(patch_size));
  if (s < 1 || s > std::min(im.width, im.height))
    throw ConfigError("patch_swap: patch size does not fit the image");

  const Mask2D fg = img::foreground_mask(im);
  auto fg_fraction = [&](int x0, int y0) {
    std::size_t cnt = 0;
    for (int y = y0; y < y0 + s; ++y)
      for (int x = x0; x < x0 + s; ++x) cnt += fg.at(x, y);
    return static_cast<double>(cnt) / (static_cast<double>(s) * s);
  };

  ArtifactParams key{Family::PatchSwap, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);
  const int max_attempts = 1000;

  int x1 = -1, y1 = -1;
  for (int a = 0; a < max_attempts && x1 < 0; ++a) {
    const int x = static_cast<int>(g.below(static_cast<std::uint64_t>(im.width - s + 1)));
    const int y = static_cast<int>(g.below(static_cast<std::uint64_t>(im.height - s + 1)));
    if (fg_fraction(x, y) >= 0.1) {
      x1 = x;
      y1 = y;
    }
  }
  if (x1 < 0) throw DataError("patch_swap: no foreground-rich patch found");

  int x2 = -1, y2 = -1;
  for (int a = 0; a < max_attempts && x2 < 0; ++a) {
    const int x = static_cast<int>(g.below(static_cast<std::uint64_t>(im.width - s + 1)));
    const int y = static_cast<int>(g.below(static_cast<std::uint64_t>(im.height - s + 1)));
    const bool overlaps = x < x1 + s && x1 < x + s && y < y1 + s && y1 < y + s;
    if (!overlaps && fg_fraction(x, y) >= 0.1) {
      x2 = x;
      y2 = y;
    }
  }
  if (x2 < 0) throw DataError("patch_swap: no disjoint second patch found");

  ArtifactResult res{im, Mask2D(im.width, im.height, false)};
  for (int dy = 0; dy < s; ++dy) {
    for (int dx = 0; dx < s; ++dx) {
      double& a = res.image.at(x1 + dx, y1 + dy);
      double& b = res.image.at(x2 + dx, y2 + dy);
      // Aligned pixels with equal values (usually background meeting
      // background) are unchanged by the swap and stay out of the mask.
      if (a != b) {
        res.gt_mask.at(x1 + dx, y1 + dy) = 1;
        res.gt_mask.at(x2 + dx, y2 + dy) = 1;
      }
      std::swap(a, b);
    }
  }
  return res;
}

// Global families ------------------------------------------------------------

ArtifactResult blur_artifact(const Image2D& im, double sigma) {
  return make_global(img::convolve2d_separable(im, img::gaussian_kernel(sigma)));
}

/// Additive Gaussian noise. The noise field depends only on the seed, never
/// on sigma, so raising sigma with a fixed seed scales one fixed field.
/// Draws: one normal deviate per pixel, row-major.
ArtifactResult noise_artifact(const Image2D& im, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("noise_artifact: sigma must be non-negative");
  ArtifactParams key{Family::Noise, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);
  Image2D out = im;
  for (double& v : out.data) v += sigma * g.gauss();
  return make_global(std::move(out));
}

/// Backward warp through a displacement field interpolated bilinearly from
/// an n x n control grid spanning the image. Draws: (dx, dy) per control
/// point, row-major over the grid.
ArtifactResult elastic_deform(const Image2D& im, int n_control, double max_disp,
                              std::uint64_t seed) {
  if (n_control < 2) throw ConfigError("elastic_deform: need at least a 2x2 control grid");
  if (max_disp < 0.0) throw ConfigError("elastic_deform: displacement must be non-negative");

  ArtifactParams key{Family::Elastic, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);
  std::vector<double> dx(static_cast<std::size_t>(n_control) * n_control);
  std::vector<double> dy(dx.size());
  for (std::size_t i = 0; i < dx.size(); ++i) {
    dx[i] = g.uniform(-max_disp, max_disp);
    dy[i] = g.uniform(-max_disp, max_disp);
  }

  Image2D out(im.width, im.height);
#pragma omp parallel for
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      const double u = static_cast<double>(x) * (n_control - 1) / (im.width - 1);
      const double v = static_cast<double>(y) * (n_control - 1) / (im.height - 1);
      const int i0 = std::min(static_cast<int>(u), n_control - 2);
      const int j0 = std::min(static_cast<int>(v), n_control - 2);
      const double fu = u - i0, fv = v - j0;
      auto lerp_grid = [&](const std::vector<double>& d) {
        const double a = d[j0 * n_control + i0], b = d[j0 * n_control + i0 + 1];
        const double c = d[(j0 + 1) * n_control + i0], e = d[(j0 + 1) * n_control + i0 + 1];
        return (1 - fv) * ((1 - fu) * a + fu * b) + fv * ((1 - fu) * c + fu * e);
      };
      out.at(x, y) = img::bilinear_sample(im, x + lerp_grid(dx), y + lerp_grid(dy));
    }
  }
  return make_global(std::move(out));
}

/// Simulated movement mid-acquisition: the first half of the k-space rows
/// comes from the still image, the rest from a rotated-and-shifted copy.
/// Draws: rotation sign, translation axis, translation sign.
ArtifactResult motion_artifact(const Image2D& im, double rot_deg, double trans_px,
                               std::uint64_t seed) {
  ArtifactParams key{Family::Motion, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);
  const double rot_sign = g.below(2) == 0 ? 1.0 : -1.0;
  const bool trans_x = g.below(2) == 0;
  const double trans_sign = g.below(2) == 0 ? 1.0 : -1.0;

  const double theta = rot_sign * rot_deg * kTwoPi / 360.0;
  const double tx = trans_x ? trans_sign * trans_px : 0.0;
  const double ty = trans_x ? 0.0 : trans_sign * trans_px;
  const double cx = (im.width - 1) / 2.0, cy = (im.height - 1) / 2.0;
  const double c = std::cos(theta), s = std::sin(theta);

  Image2D moved(im.width, im.height);
#pragma omp parallel for
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      const double qx = x - tx - cx, qy = y - ty - cy;
      const double sx = c * qx + s * qy + cx;   // rotation by -theta
      const double sy = -s * qx + c * qy + cy;
      moved.at(x, y) = img::bilinear_sample(im, sx, sy);
    }
  }

  fft::ComplexImage2D k_still = fft::fft2(im);
  const fft::ComplexImage2D k_moved = fft::fft2(moved);
  for (int y = im.height / 2; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) k_still.at(x, y) = k_moved.at(x, y);
  }
  return make_global(fft::magnitude(fft::ifft2(k_still)));
}

/// Multiplicative polynomial field exp(sum c_pq x^p y^q) over centered
/// coordinates in [-1, 1]; orders 1..3. Draws: nine coefficients in a fixed
/// (order, descending p) sequence.
ArtifactResult bias_field(const Image2D& im, double coeff_mag, std::uint64_t seed) {
  if (coeff_mag < 0.0) throw ConfigError("bias_field: coefficient bound must be non-negative");
  static constexpr int kP[9] = {1, 0, 2, 1, 0, 3, 2, 1, 0};
  static constexpr int kQ[9] = {0, 1, 0, 1, 2, 0, 1, 2, 3};

  ArtifactParams key{Family::BiasField, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);
  double coeff[9];
  for (int i = 0; i < 9; ++i) coeff[i] = g.uniform(-coeff_mag, coeff_mag);

  Image2D out(im.width, im.height);
#pragma omp parallel for
  for (int y = 0; y < im.height; ++y) {
    const double vy = im.height > 1 ? 2.0 * y / (im.height - 1) - 1.0 : 0.0;
    for (int x = 0; x < im.width; ++x) {
      const double vx = im.width > 1 ? 2.0 * x / (im.width - 1) - 1.0 : 0.0;
      double e = 0.0;
      for (int i = 0; i < 9; ++i) {
        e += coeff[i] * std::pow(vx, kP[i]) * std::pow(vy, kQ[i]);
      }
      out.at(x, y) = im.at(x, y) * std::exp(e);
    }
  }
  return make_global(std::move(out));
}

/// Scales every k-space line (in the centered spectrum, along a random axis)
/// whose index is not a multiple of n_ghosts+1 by (1 - intensity), sparing a
/// 5% band around the center. Draws: axis.
ArtifactResult ghosting(const Image2D& im, int n_ghosts, double intensity,
                        std::uint64_t seed) {
  if (n_ghosts < 1) throw ConfigError("ghosting: need at least one ghost");
  ArtifactParams key{Family::Ghosting, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);
  const bool along_y = g.below(2) == 0;

  fft::ComplexImage2D k = fft::fftshift(fft::fft2(im));
  const int n_lines = along_y ? im.height : im.width;
  const int center = n_lines / 2;
  const double keep_band = 0.05 * n_lines;
  for (int line = 0; line < n_lines; ++line) {
    if (line % (n_ghosts + 1) == 0) continue;
    if (std::abs(line - center) <= keep_band) continue;
    if (along_y) {
      for (int x = 0; x < im.width; ++x) k.at(x, line) *= 1.0 - intensity;
    } else {
      for (int y = 0; y < im.height; ++y) k.at(line, y) *= 1.0 - intensity;
    }
  }
  return make_global(fft::magnitude(fft::ifft2(fft::fftshift(k))));
}

/// Adds conjugate-symmetric impulses of magnitude intensity * max|K| at
/// random off-center k-space bins, so each spike lays a cosine over the
/// image. Draws per spike: u, v (with rejection of self-conjugate bins),
/// sign.
ArtifactResult spike(const Image2D& im, int n_spikes, double intensity,
                     std::uint64_t seed) {
  if (n_spikes < 1) throw ConfigError("spike: need at least one spike");
  ArtifactParams key{Family::Spike, {}, seed};
  rng::SplitMix64 g = artifact_stream(key);

  fft::ComplexImage2D k = fft::fft2(im);
  double peak = 0.0;
  for (const auto& c : k.data) peak = std::max(peak, std::abs(c));
  const double amp = intensity * peak;

  for (int sidx = 0; sidx < n_spikes; ++sidx) {
    int u, v;
    do {
      u = static_cast<int>(g.below(static_cast<std::uint64_t>(im.width)));
      v = static_cast<int>(g.below(static_cast<std::uint64_t>(im.height)));
    } while ((2 * u) % im.width == 0 && (2 * v) % im.height == 0);
    const double sign = g.below(2) == 0 ? 1.0 : -1.0;
    k.at(u, v) += sign * amp;
    k.at((im.width - u) % im.width, (im.height - v) % im.height) += sign * amp;
  }
  return make_global(fft::magnitude(fft::ifft2(k)));
}

}  // namespace

const char* family_name(Family f) {
  for (const auto& fn : kFamilyNames) {
    if (fn.family == f) return fn.name;
  }
  throw ConfigError("family_name: unknown family");
}

Family family_from_name(const std::string& name) {
  for (const auto& fn : kFamilyNames) {
    if (name == fn.name) return fn.family;
  }
  throw ConfigError("family_from_name: unknown family '" + name + "'");
}

bool is_local(Family f) {
  return f == Family::CircleHard || f == Family::CircleSmooth ||
         f == Family::BlackStripe || f == Family::PatchSwap;
}

double ArtifactParams::get(const std::string& name) const {
  for (const auto& [k, v] : params) {
    if (k == name) return v;
  }
  throw ConfigError(std::string("ArtifactParams: missing parameter '") + name + "' for " +
                    family_name(family));
}

std::string ArtifactParams::to_string() const {
  std::string out;
  char buf[64];
  for (const auto& [k, v] : params) {
    if (!out.empty()) out += ";";
    std::snprintf(buf, sizeof(buf), "%s=%.6g", k.c_str(), v);
    out += buf;
  }
  return out;
}

Image2D renormalize_global(const Image2D& im) { return img::normalize_minmax(im); }

ArtifactResult apply_artifact(const Image2D& im, const ArtifactParams& p) {
  switch (p.family) {
    case Family::CircleHard:
      return add_circle(im, p.get("radius"), p.get("intensity"), false, p.seed, p.family);
    case Family::CircleSmooth:
      return add_circle(im, p.get("radius"), p.get("intensity"), true, p.seed, p.family);
    case Family::BlackStripe:
      return add_black_stripe(im, p.get("thickness"), p.seed);
    case Family::PatchSwap:
      return patch_swap(im, p.get("size"), p.seed);
    case Family::Blur:
      return blur_artifact(im, p.get("sigma"));
    case Family::Noise:
      return noise_artifact(im, p.get("sigma"), p.seed);
    case Family::Elastic:
      return elastic_deform(im, static_cast<int>(std::lround(p.get("n_control"))),
                            p.get("max_disp"), p.seed);
    case Family::Motion:
      return motion_artifact(im, p.get("rotation"), p.get("translation"), p.seed);
    case Family::BiasField:
      return bias_field(im, p.get("coeff"), p.seed);
    case Family::Ghosting:
      return ghosting(im, static_cast<int>(std::lround(p.get("n_ghosts"))),
                      p.get("intensity"), p.seed);
    case Family::Spike:
      return spike(im, static_cast<int>(std::lround(p.get("n_spikes"))),
                   p.get("intensity"), p.seed);
  }
  throw ConfigError("apply_artifact: unknown family");
}

std::vector<ArtifactParams> sweep_grid(Family f, int image_size) {
  const double scale = geometry_scale(image_size);
  std::vector<ArtifactParams> grid;
  auto push = [&](std::vector<std::pair<std::string, double>> params) {
    grid.push_back({f, std::move(params), 0});
  };

  switch (f) {
    case Family::CircleSmooth:
      for (double r : linspace(3.0, 30.0, 10)) {
        for (double i : linspace(0.0, 1.0, 10)) {
          push({{"radius", std::max(2.0, r * scale)}, {"intensity", i}});
        }
      }
      break;
    case Family::BlackStripe:
      for (double t : linspace(1.0, 5.0, 5)) push({{"thickness", t}});
      break;
    case Family::PatchSwap:
      for (double s : linspace(30.0, 70.0, 10)) {
        push({{"size", std::max(8.0, std::round(s * scale))}});
      }
      break;
    case Family::Blur:
      for (double s : linspace(0.25, 2.5, 10)) push({{"sigma", s}});
      break;
    case Family::Noise:
      for (double s : linspace(0.01, 0.37, 10)) push({{"sigma", s}});
      break;
    case Family::Elastic:
      for (int n = 5; n <= 8; ++n) {
        for (double d : linspace(7.5, 30.0, 10)) {
          push({{"n_control", static_cast<double>(n)}, {"max_disp", d * scale}});
        }
      }
      break;
    case Family::Motion:
      for (double r : linspace(1.0, 10.0, 10)) {
        for (double t : linspace(1.5, 15.0, 10)) {
          push({{"rotation", r}, {"translation", t}});
        }
      }
      break;
    case Family::BiasField:
      for (double c : linspace(0.05, 0.5, 10)) push({{"coeff", c}});
      break;
    case Family::Ghosting:
      for (int n = 1; n <= 2; ++n) {
        for (double i : linspace(0.4, 0.6, 10)) {
          push({{"n_ghosts", static_cast<double>(n)}, {"intensity", i}});
        }
      }
      break;
    case Family::Spike:
      for (int n = 1; n <= 2; ++n) {
        for (double i : linspace(0.25, 2.5, 10)) {
          push({{"n_spikes", static_cast<double>(n)}, {"intensity", i}});
        }
      }
      break;
    case Family::CircleHard:
      throw ConfigError("sweep_grid: the homogeneous-circle set uses random parameters");
  }
  return grid;
}

ArtifactParams circ_params(std::uint64_t seed, int image_size) {
  const double scale = geometry_scale(image_size);
  rng::SplitMix64 g = rng::stream(seed, "circ-params");
  ArtifactParams p;
  p.family = Family::CircleHard;
  p.seed = seed;
  p.params = {{"radius", g.uniform(20.0, 40.0) * scale}, {"intensity", g.next_double()}};
  return p;
}

}  // namespace oodbench::art
