#pragma once

#include <vector>

#include "oodbench/image.hpp"

namespace oodbench::eval {

inline constexpr int kNumThresholds = 51;

/// Fixed decision grid 0, 0.02, ..., 1.
std::vector<double> threshold_grid();

struct PRCurve {
  std::vector<double> thresholds, precision, recall;
  double auprc = 0.0;
};

/// Pixel-pooled precision-recall over the fixed grid. A pixel is predicted
/// anomalous when its score is >= the threshold; an empty prediction set has
/// precision 1 by convention. The area sums precision over the recall mass
/// dropped at each threshold step. Scores must lie in [0, 1] and the pooled
/// ground truth must contain at least one positive pixel.
PRCurve pr_curve(const std::vector<const Image2D*>& score_maps,
                 const std::vector<const Mask2D*>& truth_masks);

enum class TestMethod { Exact, NormalApprox };

struct RankTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::Exact;
};

/// One-sided rank-sum test: alternative says sample b is stochastically
/// greater than sample a. Exact by enumeration while the group-assignment
/// count stays at or below 1e6, otherwise a tie-corrected normal
/// approximation with continuity correction.
RankTestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

/// One-sided signed-rank test on paired samples: alternative says 'after'
/// exceeds 'before'. Zero differences are dropped; exact enumeration up to
/// 20 informative pairs, then the tie-corrected normal approximation.
RankTestResult wilcoxon_signed_rank(const std::vector<double>& before,
                                    const std::vector<double>& after);

/// Rank correlation: average ranks for ties, then the product-moment
/// correlation of the ranks. Zero rank variance on either side throws.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

/// 1-based ranks; tied values share the average of their positions.
std::vector<double> average_ranks(const std::vector<double>& values);

}  // namespace oodbench::eval
