#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vfest/distributions.hpp"
#include "vfest/errors.hpp"
#include "vfest/intervals.hpp"
#include "vfest/rng.hpp"

using namespace vfest;

namespace {
const VarianceModel kTheta = VarianceModel::exp_linear(4.84, -0.927);
}

// Roots below are 30-digit solutions of (y - mu)^2 = q exp(t1 + t2 mu).
TEST(ExactInterval, BoundedMatchesHighPrecisionRoots) {
  const struct {
    double y, lo, hi;
  } cases[] = {{10, 9.761001525315658, 10.195411599457103},
               {11, 10.856136935339037, 11.126895667722106},
               {12, 11.911804127604898, 12.081523807334352}};
  for (const auto& c : cases) {
    const ConfidenceSet set = ci_mu_exact(c.y, kTheta, 0.05, Bounds{});
    ASSERT_EQ(set.components.size(), 1u);
    EXPECT_NEAR(set.hull.lo, c.lo, 1e-12);
    EXPECT_NEAR(set.hull.hi, c.hi, 1e-12);
    EXPECT_FALSE(set.grid_fallback);
  }
}

TEST(ExactInterval, UnboundedHasLeftTail) {
  const ConfidenceSet set = ci_mu_exact(10.0, kTheta, 0.05);
  ASSERT_EQ(set.components.size(), 2u);
  EXPECT_TRUE(set.disconnected);
  EXPECT_EQ(set.components[0].lo, -INFINITY);
  EXPECT_NEAR(set.components[0].hi, 2.2570520065803728, 1e-12);
  EXPECT_NEAR(set.components[1].lo, 9.761001525315658, 1e-12);
}

TEST(ExactInterval, SingleHalfLineWhenHumpBelowQuantile) {
  const ConfidenceSet set = ci_mu_exact(3.0, VarianceModel::exp_linear(5, -1), 0.05);
  ASSERT_EQ(set.components.size(), 1u);
  EXPECT_EQ(set.hull.lo, -INFINITY);
  EXPECT_NEAR(set.hull.hi, 4.9798301148195328, 1e-12);
}

TEST(ExactInterval, EndpointsSolvePivot) {
  const double q = dist::chi2_1_quantile(0.05);
  Rng rng(12, 0);
  for (int i = 0; i < 200; ++i) {
    const auto m = VarianceModel::exp_linear(rng.uniform(2, 6), rng.uniform(-1.5, 1.5));
    const double y = rng.uniform(7, 14);
    const ConfidenceSet set = ci_mu_exact(y, m, 0.05);
    EXPECT_TRUE(set.contains(y));
    for (const auto& c : set.components) {
      for (double e : {c.lo, c.hi}) {
        if (std::isfinite(e)) EXPECT_NEAR(single_pivot(y, m, e), q, 1e-7);
      }
    }
  }
}

TEST(ExactInterval, ConstantVarianceClosedForm) {
  const auto m = VarianceModel::exp_linear(std::log(0.25), 0.0);
  const ConfidenceSet set = ci_mu_exact(10.0, m, 0.05);
  const double half = dist::normal_quantile(0.975) * 0.5;
  EXPECT_NEAR(set.hull.lo, 10.0 - half, 1e-12);
  EXPECT_NEAR(set.hull.hi, 10.0 + half, 1e-12);
}

TEST(ExactInterval, OtherFormsUseGrid) {
  const VarianceModel power(VarianceForm::Power, {20.0, -9.0});
  const ConfidenceSet set = ci_mu_exact(10.0, power, 0.05, Bounds{});
  EXPECT_TRUE(set.grid_fallback);
  const double q = dist::chi2_1_quantile(0.05);
  for (const auto& c : set.components) {
    if (c.lo > 7.3) EXPECT_NEAR(single_pivot(10.0, power, c.lo), q, 1e-6);
    if (c.hi < 13.9) EXPECT_NEAR(single_pivot(10.0, power, c.hi), q, 1e-6);
  }
  EXPECT_THROW(ci_mu_exact(10.0, power, 0.05), ArgumentError);
}

TEST(NaiveInterval, TableValues) {
  const Interval a = to_ratio(ci_diff_naive(10.21, 10.78, kTheta, 0.05));
  EXPECT_NEAR(a.lo, 0.44, 0.005);
  EXPECT_NEAR(a.hi, 0.72, 0.005);
  const Interval b = to_ratio(ci_diff_naive(11.45, 13.36, kTheta, 0.05));
  EXPECT_NEAR(b.lo, 0.13, 0.005);
  EXPECT_NEAR(b.hi, 0.17, 0.005);
  const Interval s = ci_mu_naive(10.0, kTheta, 0.05);
  EXPECT_NEAR(s.hi - 10.0, dist::normal_quantile(0.975) * std::sqrt(kTheta(10.0)), 1e-14);
}

TEST(RegionInterval, MatchesBruteForce) {
  // Independent scan with the quadratic form written as
  // (y1 - mu1)^2 / h1 + (y2 - mu2)^2 / h2 on the same (nu1, nu2) grid.
  const double res = 0.02, a = 7.3, b = 13.9, q = -2 * std::log(0.05);
  for (auto [y1, y2] : {std::pair{10.21, 10.78}, std::pair{13.62, 11.89}, std::pair{8.0, 9.5}}) {
    const ConfidenceSet set = ci_diff_region(y1, y2, kTheta, 0.05, Bounds{a, b}, res);
    const long K = std::lround((b - a) / res);
    for (long k = -K; k <= K; ++k) {
      const double nu1 = res * k;
      const double lo = 2 * a + std::abs(nu1), hi = 2 * b - std::abs(nu1);
      double best = INFINITY;
      const long steps = static_cast<long>(std::floor((hi - lo) / res + 1e-9));
      for (long m = 0; m <= steps; ++m) {
        const double nu2 = lo + res * m;
        const double mu1 = 0.5 * (nu2 + nu1), mu2 = 0.5 * (nu2 - nu1);
        best = std::min(best, (y1 - mu1) * (y1 - mu1) / kTheta(mu1) +
                                  (y2 - mu2) * (y2 - mu2) / kTheta(mu2));
      }
      if (std::abs(best - q) < 1e-8) continue;
      EXPECT_EQ(set.contains(nu1), best <= q) << "nu1=" << nu1;
    }
  }
}

TEST(RegionInterval, SymmetryAndNesting) {
  const ConfidenceSet ab = ci_diff_region(10.83, 9.80, kTheta, 0.05, Bounds{}, 0.01);
  const ConfidenceSet ba = ci_diff_region(9.80, 10.83, kTheta, 0.05, Bounds{}, 0.01);
  EXPECT_EQ(ab.hull.lo, -ba.hull.hi);
  EXPECT_EQ(ab.hull.hi, -ba.hull.lo);
  const ConfidenceSet wide = ci_diff_region(10.83, 9.80, kTheta, 0.01, Bounds{}, 0.01);
  EXPECT_LE(wide.hull.lo, ab.hull.lo);
  EXPECT_GE(wide.hull.hi, ab.hull.hi);
  EXPECT_EQ(ci_diff_region(10.83, 9.80, kTheta, 0.05, Bounds{}, 0.01, false).hull.lo, ab.hull.lo);
}

TEST(RegionInterval, AcceptsMatchesSet) {
  const ConfidenceSet set = ci_diff_region(10.21, 10.78, kTheta, 0.05, Bounds{}, 0.01);
  EXPECT_EQ(region_accepts(10.21, 10.78, kTheta, 0.05, Bounds{}, 0.0, 0.01), set.contains(0.0));
  EXPECT_EQ(region_accepts(11.45, 13.36, kTheta, 0.05, Bounds{}, 0.0, 0.01), false);
}

TEST(RegionInterval, Errors) {
  EXPECT_THROW(ci_diff_region(10, 11, VarianceModel(VarianceForm::Power, {1, 1}), 0.05, Bounds{}),
               ArgumentError);
  EXPECT_THROW(ci_diff_region(10, 11, kTheta, 1.5, Bounds{}), ArgumentError);
  EXPECT_THROW(ci_diff_region(10, 11, kTheta, 0.05, Bounds{}, 0.0), ArgumentError);
  // Both observations far outside the bounds: nothing on the grid is accepted.
  EXPECT_THROW(ci_diff_region(30, 31, kTheta, 0.05, Bounds{}), NumericalError);
}

TEST(BonferroniInterval, ContainsHullDifference) {
  const Interval iv = ci_diff_bonferroni(10.21, 10.78, kTheta, 0.05, Bounds{});
  const ConfidenceSet s1 = ci_mu_exact(10.21, kTheta, 0.025, Bounds{});
  const ConfidenceSet s2 = ci_mu_exact(10.78, kTheta, 0.025, Bounds{});
  EXPECT_DOUBLE_EQ(iv.lo, s1.hull.lo - s2.hull.hi);
  EXPECT_DOUBLE_EQ(iv.hi, s1.hull.hi - s2.hull.lo);
}

TEST(InvertOnGrid, FindsBothComponents) {
  auto pivot = [](double mu) { return (mu - 8) * (mu - 8) * (mu - 12) * (mu - 12); };
  const auto comps = invert_on_grid(pivot, 1.0, Bounds{6, 14}, 2000);
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_NEAR(comps[0].lo, 10 - std::sqrt(4 + 1), 1e-9);
  EXPECT_NEAR(comps[1].hi, 10 + std::sqrt(4 + 1), 1e-9);
}
