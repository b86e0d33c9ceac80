#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vfest/rng.hpp"

using vfest::Rng;

TEST(Rng, Deterministic) {
  Rng a(42, 3), b(42, 3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.uniform(), b.uniform());
    EXPECT_EQ(a.normal(), b.normal());
  }
}

TEST(Rng, StreamsDiffer) {
  Rng a(42, 1), b(42, 2), c(43, 1);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform(), y = b.uniform(), z = c.uniform();
    same_ab += x == y;
    same_ac += x == z;
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(Rng, UniformRange) {
  Rng r(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(9, 0);
  const int n = 400000;
  double s = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 4 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4 * std::sqrt(96.0 / n));
}

TEST(Rng, BelowIsUniform) {
  Rng r(5, 0);
  const int k = 7, n = 70000;
  std::vector<int> counts(k);
  for (int i = 0; i < n; ++i) ++counts[r.below(k)];
  // Chi-square goodness of fit, 6 df; 0.999 quantile is 22.46.
  double chi = 0;
  for (int c : counts) chi += (c - n / k) * (c - n / k) / double(n / k);
  EXPECT_LT(chi, 22.46);
}
