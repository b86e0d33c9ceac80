#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <numeric>

#include "vfest/errors.hpp"
#include "vfest/simulate.hpp"

using namespace vfest;

TEST(Scenario, ParseAndDescribe) {
  const Scenario u = parse_scenario("uniform:8,12");
  EXPECT_EQ(u.kind, ScenarioKind::UniformContinuous);
  EXPECT_EQ(describe(u), "uniform:8,12");
  EXPECT_EQ(parse_scenario("discrete:8,12").kind, ScenarioKind::UniformDiscrete);
  EXPECT_EQ(parse_scenario("fixed").kind, ScenarioKind::FixedResample);
  EXPECT_THROW(parse_scenario("uniform:8"), ArgumentError);
  EXPECT_THROW(parse_scenario("gamma:1,2"), ArgumentError);
  Scenario r = parse_scenario("random");
  EXPECT_THROW(validate(r), ArgumentError);
  r.source_means = {9, 10, 11.5};
  EXPECT_EQ(scenario_bounds(r).a, 9);
  EXPECT_EQ(scenario_bounds(r).b, 11.5);
}

TEST(Scenario, Means) {
  Scenario s = parse_scenario("discrete:8,12");
  s.n = 5000;
  const auto m = draw_means(s, 0);
  for (double x : m) {
    EXPECT_EQ(x, std::floor(x));
    EXPECT_GE(x, 8);
    EXPECT_LE(x, 12);
  }
  Scenario f = parse_scenario("fixed");
  f.source_means = {9, 10, 11};
  f.n = 50;
  EXPECT_EQ(draw_means(f, 0), draw_means(f, 7));
  Scenario r = f;
  r.kind = ScenarioKind::RandomResample;
  EXPECT_NE(draw_means(r, 0), draw_means(r, 7));
}

TEST(Generate, DeterministicAndDistributed) {
  Scenario s;
  s.n = 20000;
  const auto theta = VarianceModel::exp_linear(5, -1);
  const auto a = generate_dataset(s, theta, 3);
  const auto b = generate_dataset(s, theta, 3);
  const auto c = generate_dataset(s, theta, 4);
  EXPECT_EQ(a.pairs()[17].y1, b.pairs()[17].y1);
  EXPECT_NE(a.pairs()[17].y1, c.pairs()[17].y1);
  // (y1 - y2)^2 / (2 h(mu)) ~ chi2(1): mean 1.
  const auto mus = draw_means(s, 3);
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i].y1 - a[i].y2;
    total += d * d / (2 * theta(mus[i]));
  }
  EXPECT_NEAR(total / a.size(), 1.0, 4 * std::sqrt(2.0 / a.size()));
}

TEST(EstimatorStudy, ThreadCountInvariant) {
  Scenario s;
  s.n = 400;
  const auto theta = VarianceModel::exp_linear(5, -1);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const std::string one = to_csv(estimator_study(s, theta, 20, Estimator::MACL));
  omp_set_num_threads(3);
  const std::string three = to_csv(estimator_study(s, theta, 20, Estimator::MACL));
  omp_set_num_threads(saved);
  EXPECT_EQ(one, three);
  EXPECT_NE(one.find("mt19937_64"), std::string::npos);
}

TEST(EstimatorStudy, ReportsBias) {
  Scenario s;
  s.n = 2000;
  const auto r = estimator_study(s, VarianceModel::exp_linear(5, -1), 30, Estimator::MACL);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.estimates.size(), 30u);
  double mean = 0;
  for (const auto& e : r.estimates) mean += e[0];
  EXPECT_NEAR(r.rows[0].mean_bias, mean / 30 - 5.0, 1e-12);
  EXPECT_LT(std::abs(r.rows[0].mean_bias), 4 * 0.25 / std::sqrt(30.0));
  EXPECT_THROW(estimator_study(s, VarianceModel::exp_linear(5, -1), 1, Estimator::MACL),
               ArgumentError);
}

TEST(EstimatorStudy, MixtureSmall) {
  Scenario s;
  s.n = 300;
  EstimatorOptions opt;
  opt.em_max_iter = 50;
  const auto r =
      estimator_study(s, VarianceModel::exp_linear(5, -0.5), 3, Estimator::Mixture, opt);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_EQ(r.estimates.size(), 3u);
}

// Exact naive coverage from one-dimensional quadrature of the N(mu, h(mu))
// density over {y : |y - mu| <= z sqrt(h(y))}.
TEST(CoverageStudy, NaiveMatchesQuadrature) {
  CoverageConfig c;
  c.theta_true = c.theta_fit = VarianceModel::exp_linear(5, -0.5);
  c.mu_grid = {7.0, 13.0};
  c.alpha = 0.01;
  c.reps = 40000;
  c.methods = {CoverageMethod::Naive};
  const auto rows = coverage_study(c).rows;
  EXPECT_NEAR(rows[0].coverage, 0.9026421139595678, 4 * rows[0].std_error);
  EXPECT_NEAR(rows[1].coverage, 0.9786788706378349, 4 * rows[1].std_error);
}

TEST(CoverageStudy, ExactIsExact) {
  CoverageConfig c;
  c.reps = 20000;
  c.mu_grid = {8.0};
  c.methods = {CoverageMethod::Exact, CoverageMethod::Naive};
  const auto rows = coverage_study(c).rows;
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].coverage, 0.95, 4 * std::sqrt(0.95 * 0.05 / 20000));
}

TEST(CoverageStudy, DifferenceMethods) {
  CoverageConfig c;
  c.reps = 300;
  c.mu_grid = {9.0};
  c.grid_res = 0.02;
  c.methods = {CoverageMethod::Region, CoverageMethod::Bonferroni, CoverageMethod::NaiveDiff};
  const auto r = coverage_study(c);
  EXPECT_EQ(r.mode, "difference");
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_GE(r.rows[0].coverage, 0.93);
  EXPECT_GE(r.rows[1].coverage, 0.93);
  c.methods = {CoverageMethod::Exact, CoverageMethod::Region};
  EXPECT_THROW(coverage_study(c), ArgumentError);
}

TEST(PowerStudy, ShapeAndMonotonicity) {
  PowerConfig c;
  c.mu_grid = {9.0};
  c.k_grid = {0.0, 3.0};
  c.reps = 2000;
  const auto r = power_study(c);
  ASSERT_EQ(r.rows.size(), 6u);
  for (std::size_t m = 0; m < 3; ++m) EXPECT_GT(r.rows[3 + m].rejection_rate, r.rows[m].rejection_rate);
  const std::string csv = to_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}
