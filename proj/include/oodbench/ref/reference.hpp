#pragma once

#include <vector>

#include "oodbench/image.hpp"

// Serial reference implementations. Each routine recomputes its result by the
// most direct method available so the optimized kernels can be checked against
// an independent route. Nothing here is used by the pipeline itself.
namespace oodbench::ref {

/// Dense 2-D convolution with the separable kernel expanded to a full
/// 2-D tap matrix; reflect padding.
Image2D convolve2d_naive(const Image2D& im, const std::vector<double>& kernel);

/// O((WH)^2) discrete Fourier transform, unnormalized forward.
void dft2_naive(const Image2D& im, Image2D* out_re, Image2D* out_im);

/// Inverse counterpart scaled by 1/(W*H).
void idft2_naive(const Image2D& re, const Image2D& im, Image2D* out_re, Image2D* out_im);

struct SsimRefMaps {
  Image2D contrast, luminance, structure, ssim;
};

/// Windowed structural similarity evaluated window-by-window per pixel.
/// Population statistics; negative variances and covariance clip to zero.
SsimRefMaps ssim_direct(const Image2D& x, const Image2D& y, int window, double c1,
                        double c2, double c3);

/// Erosion by direct per-pixel disk scan.
Mask2D erode_naive(const Mask2D& mask, double radius_px);

struct RefPRCurve {
  std::vector<double> thresholds, precision, recall;
  double auprc = 0.0;
};

/// Precision-recall over pooled pixels, one full rescan per threshold.
/// Predictions are score >= threshold; empty predictions give precision 1.
RefPRCurve pr_rescan(const std::vector<const Image2D*>& score_maps,
                     const std::vector<const Mask2D*>& truth_masks,
                     const std::vector<double>& thresholds);

/// One-sided p-value (second sample greater) for the rank-sum statistic of
/// tie-free samples, via the exact subset-count recurrence.
double mann_whitney_p_tie_free(const std::vector<double>& a, const std::vector<double>& b);

/// One-sided p-value (positive differences dominate) by direct enumeration
/// of all sign assignments; recomputes rank sums per assignment.
double wilcoxon_p_enumerated(const std::vector<double>& before,
                             const std::vector<double>& after);

/// Rank correlation assembled from first principles.
double spearman_brute(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace oodbench::ref
