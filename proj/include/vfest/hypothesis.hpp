#pragma once

#include <limits>
#include <optional>
#include <string_view>

#include "vfest/model.hpp"

namespace vfest {

enum class TestMethod { Naive, Conservative, BergerBoos };

std::string_view to_string(TestMethod method);
// naive | conservative | berger-boos
TestMethod parse_test_method(std::string_view name);

// Pivot used to build the 1 - beta set for the common mean under H0.
//   PairMean:       (Ybar - mu)^2 / (h(mu)/2) against chi2(1)
//   TwoObservation: ((y1 - mu)^2 + (y2 - mu)^2) / h(mu) against chi2(2)
enum class CBetaPivot { PairMean, TwoObservation };

inline constexpr double kDefaultBetaAnalysis = 1e-6;
inline constexpr double kDefaultBetaSimulation = 1e-3;

struct TestResult {
  TestMethod method = TestMethod::Naive;
  std::optional<double> statistic;
  double p_value = 1.0;
  double beta = std::numeric_limits<double>::quiet_NaN();
  double mu_sup = std::numeric_limits<double>::quiet_NaN();
  bool empty_nuisance_set = false;  // Berger-Boos set missed [a,b]
};

// (y1 - y2)^2 / (2 h((y1 + y2)/2)) against chi2(1).
TestResult pvalue_naive(double y1, double y2, const VarianceModel& model);

// sup over mu in [a,b] of P(chi2(1) > (y1 - y2)^2 / (2 h(mu))).
TestResult pvalue_conservative(double y1, double y2, const VarianceModel& model,
                               const Bounds& bounds);

// Supremum over a 1 - beta set for the common mean (intersected with the
// bounds, hull taken), plus beta, capped at 1.
TestResult pvalue_berger_boos(double y1, double y2, const VarianceModel& model,
                              const Bounds& bounds, double beta = kDefaultBetaAnalysis,
                              CBetaPivot pivot = CBetaPivot::PairMean);

// Location of the largest variance on [lo, hi]. Exp-linear and power forms are
// monotone in mu; others use a 1000-point grid plus golden-section refinement.
double argmax_variance(const VarianceModel& model, double lo, double hi);

}  // namespace vfest
