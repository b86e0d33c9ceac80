#include "vfest/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vfest/distributions.hpp"
#include "vfest/errors.hpp"
#include "vfest/intervals.hpp"

namespace vfest {

std::string_view to_string(TestMethod method) {
  switch (method) {
    case TestMethod::Naive:
      return "naive";
    case TestMethod::Conservative:
      return "conservative";
    case TestMethod::BergerBoos:
      return "berger-boos";
  }
  return "unknown";
}

TestMethod parse_test_method(std::string_view name) {
  if (name == "naive") return TestMethod::Naive;
  if (name == "conservative") return TestMethod::Conservative;
  if (name == "berger-boos") return TestMethod::BergerBoos;
  throw ArgumentError("unknown test method '" + std::string(name) + "'");
}

namespace {

double statistic_at(double y1, double y2, const VarianceModel& model, double mu) {
  const double d = y1 - y2;
  return d * d / (2.0 * model(mu));
}

void check_inputs(double y1, double y2) {
  if (!std::isfinite(y1) || !std::isfinite(y2)) throw ArgumentError("observations must be finite");
}

TestResult sup_over(double y1, double y2, const VarianceModel& model, double lo, double hi,
                    TestMethod method) {
  TestResult r;
  r.method = method;
  r.mu_sup = argmax_variance(model, lo, hi);
  r.statistic = statistic_at(y1, y2, model, r.mu_sup);
  r.p_value = dist::chi2_survival(1.0, *r.statistic);
  return r;
}

}  // namespace

double argmax_variance(const VarianceModel& model, double lo, double hi) {
  if (!(lo <= hi)) throw ArgumentError("argmax_variance requires lo <= hi");
  if (lo == hi) return lo;
  if (model.form() != VarianceForm::ExpLinearPlusConst) {
    // exp(t1 + t2 x) with x = mu or log(mu): monotone with the sign of t2.
    return model.theta()[1] > 0.0 ? hi : lo;
  }
  constexpr int kGrid = 1000;
  const double step = (hi - lo) / kGrid;
  int best = 0;
  double best_h = model(lo);
  for (int k = 1; k <= kGrid; ++k) {
    const double h = model(k == kGrid ? hi : lo + step * k);
    if (h > best_h) {
      best_h = h;
      best = k;
    }
  }
  // Golden-section refinement on the neighbouring cells.
  double left = std::max(lo, lo + step * (best - 1));
  double right = std::min(hi, lo + step * (best + 1));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = right - inv_phi * (right - left);
  double d = left + inv_phi * (right - left);
  for (int it = 0; it < 100 && right - left > 1e-12; ++it) {
    if (model(c) > model(d)) {
      right = d;
    } else {
      left = c;
    }
    c = right - inv_phi * (right - left);
    d = left + inv_phi * (right - left);
  }
  const double refined = 0.5 * (left + right);
  const double grid_best = best == kGrid ? hi : lo + step * best;
  return model(refined) >= best_h ? refined : grid_best;
}

TestResult pvalue_naive(double y1, double y2, const VarianceModel& model) {
  check_inputs(y1, y2);
  TestResult r;
  r.method = TestMethod::Naive;
  r.mu_sup = 0.5 * (y1 + y2);
  r.statistic = statistic_at(y1, y2, model, r.mu_sup);
  r.p_value = dist::chi2_survival(1.0, *r.statistic);
  return r;
}

TestResult pvalue_conservative(double y1, double y2, const VarianceModel& model,
                               const Bounds& bounds) {
  check_inputs(y1, y2);
  validate(bounds);
  return sup_over(y1, y2, model, bounds.a, bounds.b, TestMethod::Conservative);
}

TestResult pvalue_berger_boos(double y1, double y2, const VarianceModel& model,
                              const Bounds& bounds, double beta, CBetaPivot pivot) {
  check_inputs(y1, y2);
  validate(bounds);
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ArgumentError("beta must lie in (0,1), got " + std::to_string(beta));
  }
  ConfidenceSet nuisance;
  if (pivot == CBetaPivot::PairMean) {
    // Under H0 the pair mean is N(mu, h(mu)/2).
    nuisance = invert_single_pivot(0.5 * (y1 + y2), model.scaled(0.5),
                                   dist::chi2_1_quantile(beta), bounds);
  } else {
    auto g = [&](double mu) {
      return ((y1 - mu) * (y1 - mu) + (y2 - mu) * (y2 - mu)) / model(mu);
    };
    for (const auto& c : invert_on_grid(g, dist::chi2_2_quantile(beta), bounds)) {
      nuisance.components.push_back(c);
    }
    if (!nuisance.components.empty()) {
      nuisance.hull = {nuisance.components.front().lo, nuisance.components.back().hi};
    }
  }

  TestResult r;
  r.method = TestMethod::BergerBoos;
  r.beta = beta;
  if (nuisance.empty()) {
    r.empty_nuisance_set = true;
    r.p_value = beta;
    return r;
  }
  r = sup_over(y1, y2, model, nuisance.hull.lo, nuisance.hull.hi, TestMethod::BergerBoos);
  r.beta = beta;
  r.p_value = std::min(1.0, r.p_value + beta);
  return r;
}

}  // namespace vfest
