#include "oodbench/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace oodbench::eval {

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / 1.4142135623730950488); }

/// Binomial coefficient, saturating at just over the enumeration budget.
double binomial_capped(int n, int k, double cap) {
  double c = 1.0;
  k = std::min(k, n - k);
  for (int i = 1; i <= k; ++i) {
    c *= static_cast<double>(n - k + i) / i;
    if (c > cap) return cap + 1.0;
  }
  return c;
}

/// Sum of (t^3 - t) over tie groups of a sorted value list.
double tie_term(std::vector<double> sorted_values) {
  double term = 0.0;
  std::size_t i = 0;
  while (i < sorted_values.size()) {
    std::size_t j = i;
    while (j + 1 < sorted_values.size() && sorted_values[j + 1] == sorted_values[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    term += t * t * t - t;
    i = j + 1;
  }
  return term;
}

}  // namespace

std::vector<double> threshold_grid() {
  std::vector<double> t(kNumThresholds);
  for (int k = 0; k < kNumThresholds; ++k) t[k] = static_cast<double>(k) / 50.0;
  return t;
}

PRCurve pr_curve(const std::vector<const Image2D*>& score_maps,
                 const std::vector<const Mask2D*>& truth_masks) {
  if (score_maps.empty() || score_maps.size() != truth_masks.size())
    throw ConfigError("pr_curve: need matching non-empty map and mask lists");

  // Bin pixels once: bin(s) = max{k : k/50 <= s}; counting bins >= k then
  // reproduces the per-threshold comparison s >= k/50 exactly.
  std::int64_t pos_hist[kNumThresholds] = {0};
  std::int64_t neg_hist[kNumThresholds] = {0};
  std::int64_t total_pos = 0;
  for (std::size_t s = 0; s < score_maps.size(); ++s) {
    const Image2D& sm = *score_maps[s];
    const Mask2D& gm = *truth_masks[s];
    if (sm.width != gm.width || sm.height != gm.height)
      throw ConfigError("pr_curve: map and mask sizes differ");
    for (std::size_t i = 0; i < sm.pixel_count(); ++i) {
      double v = sm.data[i];
      if (v < -1e-9 || v > 1.0 + 1e-9)
        throw ConfigError("pr_curve: score outside [0, 1]");
      v = std::clamp(v, 0.0, 1.0);
      int bin = std::min(kNumThresholds - 1, static_cast<int>(std::floor(v * 50.0)));
      while (bin + 1 < kNumThresholds && static_cast<double>(bin + 1) / 50.0 <= v) ++bin;
      while (bin > 0 && static_cast<double>(bin) / 50.0 > v) --bin;
      if (gm.bits[i]) {
        ++pos_hist[bin];
        ++total_pos;
      } else {
        ++neg_hist[bin];
      }
    }
  }
  if (total_pos == 0) throw DataError("pr_curve: no positive pixels in ground truth");

  PRCurve curve;
  curve.thresholds = threshold_grid();
  std::int64_t tp = 0, fp = 0;
  std::vector<double> precision(kNumThresholds), recall(kNumThresholds);
  for (int k = kNumThresholds - 1; k >= 0; --k) {
    tp += pos_hist[k];
    fp += neg_hist[k];
    precision[k] = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    recall[k] = static_cast<double>(tp) / static_cast<double>(total_pos);
  }
  curve.precision = std::move(precision);
  curve.recall = std::move(recall);

  double area = 0.0;
  for (int k = 0; k < kNumThresholds; ++k) {
    const double r_next = k + 1 < kNumThresholds ? curve.recall[k + 1] : 0.0;
    area += (curve.recall[k] - r_next) * curve.precision[k];
  }
  curve.auprc = area;
  return curve;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
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

RankTestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw ConfigError("mann_whitney_u: empty sample");
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  const int N = na + nb;
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = average_ranks(pooled);
  double r_b = 0.0;
  for (int i = 0; i < nb; ++i) r_b += ranks[na + i];
  const double u_b = r_b - static_cast<double>(nb) * (nb + 1) / 2.0;

  RankTestResult res;
  res.statistic = u_b;
  const double n_assignments = binomial_capped(N, nb, 1e6);
  if (n_assignments <= 1e6) {
    // Enumerate every way to pick which pooled ranks belong to sample b.
    res.method = TestMethod::Exact;
    std::vector<int> idx(nb);
    std::iota(idx.begin(), idx.end(), 0);
    std::int64_t count_ge = 0, total = 0;
    while (true) {
      double r = 0.0;
      for (int i : idx) r += ranks[i];
      ++total;
      if (r >= r_b - 1e-9) ++count_ge;
      int pos = nb - 1;
      while (pos >= 0 && idx[pos] == N - nb + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int i = pos + 1; i < nb; ++i) idx[i] = idx[i - 1] + 1;
    }
    res.p_value = static_cast<double>(count_ge) / static_cast<double>(total);
    return res;
  }

  res.method = TestMethod::NormalApprox;
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  const double ties = tie_term(std::move(sorted));
  const double mu = static_cast<double>(na) * nb / 2.0;
  const double var = static_cast<double>(na) * nb / 12.0 *
                     (static_cast<double>(N + 1) - ties / (static_cast<double>(N) * (N - 1)));
  if (!(var > 0.0)) throw NumericError("mann_whitney_u: zero variance (all values tied)");
  const double z = (u_b - mu - 0.5) / std::sqrt(var);
  res.p_value = normal_sf(z);
  return res;
}

RankTestResult wilcoxon_signed_rank(const std::vector<double>& before,
                                    const std::vector<double>& after) {
  if (before.size() != after.size())
    throw ConfigError("wilcoxon_signed_rank: pair lists differ in length");
  std::vector<double> absd;
  std::vector<int> sgn;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double diff = after[i] - before[i];
    if (diff != 0.0) {
      absd.push_back(std::fabs(diff));
      sgn.push_back(diff > 0.0 ? 1 : -1);
    }
  }
  const int n = static_cast<int>(absd.size());
  if (n == 0) throw DataError("wilcoxon_signed_rank: all differences are zero");
  const std::vector<double> ranks = average_ranks(absd);
  double w_pos = 0.0;
  for (int i = 0; i < n; ++i) {
    if (sgn[i] > 0) w_pos += ranks[i];
  }

  RankTestResult res;
  res.statistic = w_pos;
  if (n <= 20) {
    res.method = TestMethod::Exact;
    const std::uint64_t total = 1ull << n;
    std::uint64_t count_ge = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double w = 0.0;
      for (int i = 0; i < n; ++i) {
        if (mask & (1ull << i)) w += ranks[i];
      }
      if (w >= w_pos - 1e-9) ++count_ge;
    }
    res.p_value = static_cast<double>(count_ge) / static_cast<double>(total);
    return res;
  }

  res.method = TestMethod::NormalApprox;
  std::vector<double> sorted = absd;
  std::sort(sorted.begin(), sorted.end());
  const double ties = tie_term(std::move(sorted));
  const double mu = static_cast<double>(n) * (n + 1) / 4.0;
  const double var = static_cast<double>(n) * (n + 1) * (2 * n + 1) / 24.0 - ties / 48.0;
  if (!(var > 0.0)) throw NumericError("wilcoxon_signed_rank: zero variance");
  const double z = (w_pos - mu - 0.5) / std::sqrt(var);
  res.p_value = normal_sf(z);
  return res;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("spearman_rho: need two same-length samples");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw NumericError("spearman_rho: zero rank variance on one side");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oodbench::eval
