#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oodbench/evaluation.hpp"
#include "oodbench/ref/reference.hpp"
#include "oodbench/rng.hpp"
#include "oodbench/scoring.hpp"

using namespace oodbench;
using eval::TestMethod;

namespace {

struct Pool {
  std::vector<Image2D> scores;
  std::vector<Mask2D> masks;
  std::vector<const Image2D*> score_ptrs;
  std::vector<const Mask2D*> mask_ptrs;
};

Pool random_pool(int slices, int w, int h, std::uint64_t seed, double positive_rate) {
  Pool p;
  rng::SplitMix64 g = rng::stream(seed, "eval-pool");
  for (int s = 0; s < slices; ++s) {
    Image2D sc(w, h);
    Mask2D mk(w, h);
    for (std::size_t i = 0; i < sc.pixel_count(); ++i) {
      sc.data[i] = g.next_double();
      mk.bits[i] = g.next_double() < positive_rate ? 1 : 0;
    }
    p.scores.push_back(std::move(sc));
    p.masks.push_back(std::move(mk));
  }
  for (int s = 0; s < slices; ++s) {
    p.score_ptrs.push_back(&p.scores[s]);
    p.mask_ptrs.push_back(&p.masks[s]);
  }
  return p;
}

std::vector<double> random_sample(int n, std::uint64_t seed, double offset = 0.0) {
  std::vector<double> v(n);
  rng::SplitMix64 g = rng::stream(seed, "sample");
  for (double& x : v) x = offset + g.next_double();
  return v;
}

/// Brute-force one-sided rank-sum p-value valid with ties: enumerate every
/// way to label the pooled values, score each labeling by pairwise wins with
/// half-credit for equals.
double mw_brute(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  const int n = static_cast<int>(pool.size());
  const int nb = static_cast<int>(b.size());
  auto u_of = [&](const std::vector<int>& b_idx) {
    double u = 0.0;
    std::vector<bool> is_b(n, false);
    for (int i : b_idx) is_b[i] = true;
    for (int i = 0; i < n; ++i) {
      if (!is_b[i]) continue;
      for (int j = 0; j < n; ++j) {
        if (is_b[j]) continue;
        if (pool[i] > pool[j]) u += 1.0;
        else if (pool[i] == pool[j]) u += 0.5;
      }
    }
    return u;
  };
  std::vector<int> obs(nb);
  for (int i = 0; i < nb; ++i) obs[i] = static_cast<int>(a.size()) + i;
  const double u_obs = u_of(obs);

  std::vector<int> pick(nb);
  for (int i = 0; i < nb; ++i) pick[i] = i;
  long total = 0, at_least = 0;
  while (true) {
    ++total;
    if (u_of(pick) >= u_obs - 1e-12) ++at_least;
    int i = nb - 1;
    while (i >= 0 && pick[i] == n - nb + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < nb; ++j) pick[j] = pick[j - 1] + 1;
  }
  return static_cast<double>(at_least) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("threshold grid: 51 evenly spaced cut points") {
  const std::vector<double> t = eval::threshold_grid();
  REQUIRE(t.size() == 51);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 1.0);
  for (int k = 0; k < 51; ++k) CHECK(t[k] == doctest::Approx(k / 50.0).epsilon(1e-15));
}

TEST_CASE("pr curve: matches the per-threshold rescan oracle") {
  const Pool p = random_pool(3, 16, 12, 101, 0.2);
  const eval::PRCurve fast = eval::pr_curve(p.score_ptrs, p.mask_ptrs);
  const ref::RefPRCurve slow = ref::pr_rescan(p.score_ptrs, p.mask_ptrs, eval::threshold_grid());
  REQUIRE(fast.precision.size() == 51);
  REQUIRE(slow.precision.size() == 51);
  for (int k = 0; k < 51; ++k) {
    CHECK(fast.precision[k] == slow.precision[k]);
    CHECK(fast.recall[k] == slow.recall[k]);
  }
  CHECK(fast.auprc == doctest::Approx(slow.auprc).epsilon(1e-14));
  for (int k = 1; k < 51; ++k) CHECK(fast.recall[k] <= fast.recall[k - 1]);
}

TEST_CASE("pr curve: a perfect detector scores exactly one") {
  Image2D sc(8, 8, 0.0);
  Mask2D mk(8, 8, 0);
  for (int i = 0; i < 10; ++i) {
    sc.data[i * 5] = 1.0;
    mk.bits[i * 5] = 1;
  }
  const eval::PRCurve c = eval::pr_curve({&sc}, {&mk});
  CHECK(c.auprc == 1.0);
}

TEST_CASE("pr curve: a constant scorer lands on the prevalence") {
  Image2D sc(10, 10, 0.5);
  Mask2D mk(10, 10, 0);
  for (int i = 0; i < 37; ++i) mk.bits[i] = 1;
  const eval::PRCurve c = eval::pr_curve({&sc}, {&mk});
  CHECK(c.auprc == doctest::Approx(0.37).epsilon(1e-14));
  // Above the constant nothing is predicted: precision 1 by convention.
  for (int k = 26; k < 51; ++k) {
    CHECK(c.precision[k] == 1.0);
    CHECK(c.recall[k] == 0.0);
  }
  for (int k = 0; k <= 25; ++k) {
    CHECK(c.precision[k] == doctest::Approx(0.37));
    CHECK(c.recall[k] == 1.0);
  }
}

TEST_CASE("pr curve: four-pixel worked example") {
  Image2D sc(4, 1, 0.0);
  Mask2D mk(4, 1, 0);
  sc.data = {1.0, 0.6, 0.4, 0.2};
  mk.bits = {1, 0, 1, 0};
  const eval::PRCurve c = eval::pr_curve({&sc}, {&mk});
  CHECK(c.auprc == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("pr curve: input validation") {
  Image2D sc(4, 1, 0.5);
  Mask2D empty(4, 1, 0);
  CHECK_THROWS_AS(eval::pr_curve({&sc}, {&empty}), DataError);

  Mask2D mk(4, 1, 0);
  mk.bits[0] = 1;
  Image2D bad(4, 1, 0.5);
  bad.data[2] = -0.1;
  CHECK_THROWS_AS(eval::pr_curve({&bad}, {&mk}), ConfigError);
  bad.data[2] = 1.1;
  CHECK_THROWS_AS(eval::pr_curve({&bad}, {&mk}), ConfigError);

  // A hair of floating-point slack outside [0, 1] is tolerated.
  Image2D close(4, 1, 0.5);
  close.data[0] = 1.0 + 1e-10;
  close.data[1] = -1e-10;
  CHECK_NOTHROW(eval::pr_curve({&close}, {&mk}));

  Image2D wrong(3, 1, 0.5);
  CHECK_THROWS_AS(eval::pr_curve({&wrong}, {&mk}), ConfigError);
  CHECK_THROWS_AS(eval::pr_curve({}, {}), ConfigError);
}

TEST_CASE("rank-sum test: textbook three-versus-three case") {
  const eval::RankTestResult r = eval::mann_whitney_u({1, 2, 3}, {4, 5, 6});
  CHECK(r.method == TestMethod::Exact);
  CHECK(r.statistic == doctest::Approx(9.0));
  CHECK(r.p_value == doctest::Approx(0.05).epsilon(1e-12));

  const eval::RankTestResult flip = eval::mann_whitney_u({4, 5, 6}, {1, 2, 3});
  CHECK(flip.statistic == doctest::Approx(0.0));
  CHECK(flip.p_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rank-sum test: exact path agrees with the subset-count recurrence") {
  for (const auto& [na, nb, seed] : {std::tuple{7, 7, 201}, {8, 6, 202}, {5, 9, 203}}) {
    const std::vector<double> a = random_sample(na, seed);
    const std::vector<double> b = random_sample(nb, seed + 50, 0.2);
    const eval::RankTestResult r = eval::mann_whitney_u(a, b);
    CHECK(r.method == TestMethod::Exact);
    CHECK(r.p_value == doctest::Approx(ref::mann_whitney_p_tie_free(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("rank-sum test: exact path handles ties (brute-force check)") {
  const std::vector<double> a{1.0, 2.0, 2.0, 4.0};
  const std::vector<double> b{2.0, 3.0, 4.0, 4.0};
  const eval::RankTestResult r = eval::mann_whitney_u(a, b);
  CHECK(r.method == TestMethod::Exact);
  CHECK(r.p_value == doctest::Approx(mw_brute(a, b)).epsilon(1e-12));
}

TEST_CASE("rank-sum test: normal approximation tracks the exact law at n = 20") {
  const std::vector<double> a = random_sample(20, 211);
  const std::vector<double> b = random_sample(20, 212, 0.15);
  const eval::RankTestResult r = eval::mann_whitney_u(a, b);
  CHECK(r.method == TestMethod::NormalApprox);  // C(40, 20) dwarfs the exact cap
  const double exact = ref::mann_whitney_p_tie_free(a, b);
  CHECK(std::fabs(r.p_value - exact) < 0.01);
}

TEST_CASE("signed-rank test: all-positive three-pair case") {
  const eval::RankTestResult r =
      eval::wilcoxon_signed_rank({1.0, 1.0, 1.0}, {2.0, 3.0, 4.0});
  CHECK(r.method == TestMethod::Exact);
  CHECK(r.statistic == doctest::Approx(6.0));
  CHECK(r.p_value == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("signed-rank test: zero differences are dropped") {
  const eval::RankTestResult r =
      eval::wilcoxon_signed_rank({1.0, 1.0, 3.0}, {1.0, 2.0, 1.0});
  // Differences 0, +1, -2: the zero goes away, +1 takes rank 1 of 2.
  CHECK(r.statistic == doctest::Approx(1.0));
  CHECK(r.p_value == doctest::Approx(0.75).epsilon(1e-12));
  CHECK_THROWS_AS(eval::wilcoxon_signed_rank({1.0, 2.0}, {1.0, 2.0}), DataError);
}

TEST_CASE("signed-rank test: exact path agrees with full sign enumeration") {
  for (const auto& [n, seed] : {std::pair{10, 221}, {14, 222}}) {
    const std::vector<double> before = random_sample(n, seed);
    std::vector<double> after = random_sample(n, seed + 50);
    for (double& v : after) v += 0.1;
    const eval::RankTestResult r = eval::wilcoxon_signed_rank(before, after);
    CHECK(r.method == TestMethod::Exact);
    CHECK(r.p_value ==
          doctest::Approx(ref::wilcoxon_p_enumerated(before, after)).epsilon(1e-12));
  }
}

TEST_CASE("signed-rank test: normal approximation tracks the exact law") {
  const std::vector<double> before = random_sample(22, 231);
  std::vector<double> after = random_sample(22, 232);
  for (std::size_t i = 0; i < after.size(); ++i) after[i] = before[i] + after[i] - 0.35;
  const eval::RankTestResult r = eval::wilcoxon_signed_rank(before, after);
  CHECK(r.method == TestMethod::NormalApprox);
  const double exact = ref::wilcoxon_p_enumerated(before, after);
  CHECK(std::fabs(r.p_value - exact) < 0.01);
}

TEST_CASE("rank correlation: endpoints, ties, oracle agreement") {
  CHECK(eval::spearman_rho({1, 2, 3, 4}, {10, 20, 25, 90}) == doctest::Approx(1.0));
  CHECK(eval::spearman_rho({1, 2, 3, 4}, {8, 6, 4, 2}) == doctest::Approx(-1.0));

  const std::vector<double> x{3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0};
  const std::vector<double> y{2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0};
  CHECK(eval::spearman_rho(x, y) == doctest::Approx(ref::spearman_brute(x, y)).epsilon(1e-12));

  CHECK_THROWS_AS(eval::spearman_rho({1, 1, 1}, {1, 2, 3}), NumericError);
  CHECK_THROWS_AS(eval::spearman_rho({1, 2}, {1, 2, 3}), ConfigError);
}

TEST_CASE("average ranks: ties share their positional mean") {
  const std::vector<double> r = eval::average_ranks({10, 20, 20, 30});
  REQUIRE(r.size() == 4);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 2.5);
  CHECK(r[2] == 2.5);
  CHECK(r[3] == 4.0);
  CHECK(eval::average_ranks({5.0}) == std::vector<double>{1.0});
}

TEST_CASE("anomaly map: mean of inverted members, polarity enforced") {
  metrics::MetricMap a{Image2D(2, 2, 0.2), "ssim", metrics::Orientation::SimilarityLike, true};
  metrics::MetricMap b{Image2D(2, 2, 0.6), "perceptual", metrics::Orientation::ErrorLike, true};
  const Image2D fused = scoring::anomaly_map({&a, &b});
  for (double v : fused.data) CHECK(v == doctest::Approx(0.4));
  CHECK(scoring::slice_score(fused) == doctest::Approx(0.4));

  metrics::MetricMap raw{Image2D(2, 2, 0.6), "ssim", metrics::Orientation::SimilarityLike, false};
  CHECK_THROWS_AS(scoring::anomaly_map({&a, &raw}), ConfigError);
  CHECK_THROWS_AS(scoring::anomaly_map({}), ConfigError);
  metrics::MetricMap odd{Image2D(3, 2, 0.6), "perceptual", metrics::Orientation::ErrorLike, true};
  CHECK_THROWS_AS(scoring::anomaly_map({&a, &odd}), ConfigError);
}

TEST_CASE("slice score: plain mean over every pixel") {
  Image2D m(2, 2, 0.0);
  m.data = {0.0, 1.0, 0.25, 0.75};
  CHECK(scoring::slice_score(m) == doctest::Approx(0.5));
}
