#include "oodbench/ref/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>

namespace oodbench::ref {

namespace {

int reflect(int i, int n) {
  if (i < 0) i = -i - 1;
  if (i >= n) i = 2 * n - 1 - i;
  return i;
}

std::vector<double> average_ranks_sorted(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Image2D convolve2d_naive(const Image2D& im, const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size()) / 2;
  Image2D out(im.width, im.height);
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double w = kernel[dy + radius] * kernel[dx + radius];
          acc += w * im.at(reflect(x + dx, im.width), reflect(y + dy, im.height));
        }
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

void dft2_naive(const Image2D& im, Image2D* out_re, Image2D* out_im) {
  const int W = im.width, H = im.height;
  *out_re = Image2D(W, H);
  *out_im = Image2D(W, H);
  const double two_pi = 6.283185307179586476925286766559;
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      double re = 0.0, imag = 0.0;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const double ang = -two_pi * (static_cast<double>(u) * x / W +
                                        static_cast<double>(v) * y / H);
          re += im.at(x, y) * std::cos(ang);
          imag += im.at(x, y) * std::sin(ang);
        }
      }
      out_re->at(u, v) = re;
      out_im->at(u, v) = imag;
    }
  }
}

void idft2_naive(const Image2D& re, const Image2D& im, Image2D* out_re, Image2D* out_im) {
  const int W = re.width, H = re.height;
  *out_re = Image2D(W, H);
  *out_im = Image2D(W, H);
  const double two_pi = 6.283185307179586476925286766559;
  const double scale = 1.0 / (static_cast<double>(W) * H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double r = 0.0, i = 0.0;
      for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
          const double ang = two_pi * (static_cast<double>(u) * x / W +
                                       static_cast<double>(v) * y / H);
          const double c = std::cos(ang), s = std::sin(ang);
          r += re.at(u, v) * c - im.at(u, v) * s;
          i += re.at(u, v) * s + im.at(u, v) * c;
        }
      }
      out_re->at(x, y) = r * scale;
      out_im->at(x, y) = i * scale;
    }
  }
}

SsimRefMaps ssim_direct(const Image2D& x, const Image2D& y, int window, double c1,
                        double c2, double c3) {
  const int radius = window / 2;
  const double inv_n = 1.0 / (static_cast<double>(window) * window);
  SsimRefMaps maps{Image2D(x.width, x.height), Image2D(x.width, x.height),
                   Image2D(x.width, x.height), Image2D(x.width, x.height)};
  for (int py = 0; py < x.height; ++py) {
    for (int px = 0; px < x.width; ++px) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double a = x.at(reflect(px + dx, x.width), reflect(py + dy, x.height));
          const double b = y.at(reflect(px + dx, x.width), reflect(py + dy, x.height));
          sx += a;
          sy += b;
          sxx += a * a;
          syy += b * b;
          sxy += a * b;
        }
      }
      const double mx = sx * inv_n, my = sy * inv_n;
      const double varx = std::max(0.0, sxx * inv_n - mx * mx);
      const double vary = std::max(0.0, syy * inv_n - my * my);
      const double cov = std::max(0.0, sxy * inv_n - mx * my);
      const double sdx = std::sqrt(varx), sdy = std::sqrt(vary);
      const double c = (2.0 * sdx * sdy + c2) / (varx + vary + c2);
      const double l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
      const double s = (cov + c3) / (sdx * sdy + c3);
      maps.contrast.at(px, py) = c;
      maps.luminance.at(px, py) = l;
      maps.structure.at(px, py) = s;
      maps.ssim.at(px, py) = c * l * s;
    }
  }
  return maps;
}

Mask2D erode_naive(const Mask2D& mask, double radius_px) {
  const int r = static_cast<int>(std::floor(radius_px));
  Mask2D out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool keep = mask.at(x, y) != 0;
      for (int dy = -r; keep && dy <= r; ++dy) {
        for (int dx = -r; keep && dx <= r; ++dx) {
          if (dx * dx + dy * dy > radius_px * radius_px) continue;
          const int xx = x + dx, yy = y + dy;
          keep = xx >= 0 && xx < mask.width && yy >= 0 && yy < mask.height &&
                 mask.at(xx, yy) != 0;
        }
      }
      out.at(x, y) = keep ? 1 : 0;
    }
  }
  return out;
}

RefPRCurve pr_rescan(const std::vector<const Image2D*>& score_maps,
                     const std::vector<const Mask2D*>& truth_masks,
                     const std::vector<double>& thresholds) {
  if (score_maps.size() != truth_masks.size() || score_maps.empty())
    throw DataError("pr_rescan: need matching non-empty map and mask lists");
  std::int64_t total_pos = 0;
  for (const Mask2D* m : truth_masks) total_pos += static_cast<std::int64_t>(m->count());
  if (total_pos == 0) throw DataError("pr_rescan: no positive pixels in ground truth");

  RefPRCurve curve;
  curve.thresholds = thresholds;
  for (double t : thresholds) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t s = 0; s < score_maps.size(); ++s) {
      const Image2D& sm = *score_maps[s];
      const Mask2D& gm = *truth_masks[s];
      for (std::size_t i = 0; i < sm.pixel_count(); ++i) {
        if (sm.data[i] >= t) {
          if (gm.bits[i]) ++tp; else ++fp;
        }
      }
    }
    curve.precision.push_back(tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0);
    curve.recall.push_back(static_cast<double>(tp) / static_cast<double>(total_pos));
  }

  double area = 0.0;
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
    const double r_next = k + 1 < curve.thresholds.size() ? curve.recall[k + 1] : 0.0;
    area += (curve.recall[k] - r_next) * curve.precision[k];
  }
  curve.auprc = area;
  return curve;
}

double mann_whitney_p_tie_free(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  if (std::set<double>(pooled.begin(), pooled.end()).size() != pooled.size())
    throw DataError("mann_whitney_p_tie_free: samples contain ties");

  const std::vector<double> ranks = average_ranks_sorted(pooled);
  const std::size_t nb = b.size();
  const int N = static_cast<int>(pooled.size());
  double r_obs = 0.0;
  for (std::size_t i = 0; i < nb; ++i) r_obs += ranks[a.size() + i];

  // f[k][s]: subsets of size k from ranks processed so far with rank sum s.
  const int max_sum = N * (N + 1) / 2;
  std::vector<std::vector<double>> f(nb + 1, std::vector<double>(max_sum + 1, 0.0));
  f[0][0] = 1.0;
  for (int r = 1; r <= N; ++r) {
    for (int k = static_cast<int>(std::min<std::size_t>(nb, r)); k >= 1; --k) {
      for (int s = max_sum; s >= r; --s) {
        if (f[k - 1][s - r] != 0.0) f[k][s] += f[k - 1][s - r];
      }
    }
  }
  double count_ge = 0.0, total = 0.0;
  const int r_min = static_cast<int>(std::ceil(r_obs - 1e-9));
  for (int s = 0; s <= max_sum; ++s) {
    total += f[nb][s];
    if (s >= r_min) count_ge += f[nb][s];
  }
  return count_ge / total;
}

double wilcoxon_p_enumerated(const std::vector<double>& before,
                             const std::vector<double>& after) {
  std::vector<double> absd;
  std::vector<int> sign;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double d = after[i] - before[i];
    if (d != 0.0) {
      absd.push_back(std::fabs(d));
      sign.push_back(d > 0 ? 1 : -1);
    }
  }
  const std::size_t n = absd.size();
  if (n == 0) throw DataError("wilcoxon_p_enumerated: all differences are zero");
  if (n > 24) throw DataError("wilcoxon_p_enumerated: too many pairs to enumerate");
  const std::vector<double> ranks = average_ranks_sorted(absd);
  double w_obs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sign[i] > 0) w_obs += ranks[i];
  }
  std::uint64_t count = 0;
  const std::uint64_t total = 1ull << n;
  for (std::uint64_t m = 0; m < total; ++m) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (m & (1ull << i)) w += ranks[i];
    }
    if (w >= w_obs - 1e-9) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(total);
}

double spearman_brute(const std::vector<double>& x, const std::vector<double>& y) {
  const std::vector<double> rx = average_ranks_sorted(x);
  const std::vector<double> ry = average_ranks_sorted(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw NumericError("spearman_brute: zero rank variance");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oodbench::ref
