#include "vfest/macl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vfest/errors.hpp"
#include "vfest/solver.hpp"

namespace vfest {

namespace {

struct PairColumns {
  std::vector<double> ybar;
  std::vector<double> s2;
};

PairColumns columns(const PairedDataset& data) {
  PairColumns c;
  c.ybar.reserve(data.size());
  c.s2.reserve(data.size());
  for (const auto& p : data.pairs()) {
    const PairStats s = pair_stats(p);
    c.ybar.push_back(s.ybar);
    c.s2.push_back(s.s2);
  }
  return c;
}

}  // namespace

std::vector<double> macl_default_init(const PairedDataset& data, VarianceForm form) {
  if (data.size() < 2) throw ArgumentError("default init needs at least two pairs");
  const PairColumns c = columns(data);
  const std::size_t n = c.ybar.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (form == VarianceForm::Power) {
      if (!(c.ybar[i] > 0.0)) throw DomainError("power form requires positive pair means");
      x[i] = std::log(c.ybar[i]);
    } else {
      x[i] = c.ybar[i];
    }
    y[i] = std::log(c.s2[i] + 1e-12);
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  const double intercept = my - slope * mx;
  if (form != VarianceForm::ExpLinearPlusConst) return {intercept, slope};
  double smallest = intercept + slope * x.front();
  for (double xi : x) smallest = std::min(smallest, intercept + slope * xi);
  return {intercept, slope, smallest + std::log(0.5)};
}

FitResult macl_fit(const PairedDataset& data, VarianceForm form, const MaclOptions& options) {
  const std::size_t p = parameter_count(form);
  const std::size_t free_count =
      options.free.empty()
          ? p
          : static_cast<std::size_t>(std::count(options.free.begin(), options.free.end(), true));
  // Three pairs for a full two-parameter fit; fewer when coefficients are pinned.
  const std::size_t min_pairs = free_count == p ? std::max<std::size_t>(3, p + 1) : free_count + 1;
  if (data.size() < min_pairs) {
    throw ArgumentError("macl_fit needs at least " + std::to_string(min_pairs) + " pairs, got " +
                        std::to_string(data.size()));
  }
  const PairColumns c = columns(data);
  if (std::all_of(c.s2.begin(), c.s2.end(), [](double s) { return s == 0.0; })) {
    throw DataError("every pair is tied (S^2 = 0); the variance function is not estimable");
  }
  if (form == VarianceForm::Power &&
      std::any_of(c.ybar.begin(), c.ybar.end(), [](double m) { return !(m > 0.0); })) {
    throw DomainError("power form requires all pair means > 0");
  }
  const std::vector<double> init = options.init ? *options.init : macl_default_init(data, form);

  SolverOptions so;
  so.tol = options.tol;
  so.max_iter = options.max_iter;
  so.free = options.free;
  const VarianceRegressionData reg{c.ybar, c.s2, {}};
  const SolverResult s = solve_variance_regression(form, reg, init, so);
  if (!s.converged) {
    throw ConvergenceError("MACL fit did not converge after " + std::to_string(s.iterations) +
                               " iterations (residual " + std::to_string(s.residual_norm) + ")",
                           s.theta, s.residual_norm);
  }
  FitResult out;
  out.form = form;
  out.theta_hat = s.theta;
  out.converged = true;
  out.iterations = s.iterations;
  out.residual_norm = s.residual_norm;
  return out;
}

FitResult macl_fit_homoscedastic(const PairedDataset& data, double tol, int max_iter) {
  if (data.empty()) throw ArgumentError("macl_fit_homoscedastic needs at least one pair");
  double mean_s2 = 0.0;
  for (const auto& p : data.pairs()) mean_s2 += pair_stats(p).s2;
  mean_s2 /= static_cast<double>(data.size());
  if (mean_s2 == 0.0) {
    throw DataError("every pair is tied (S^2 = 0); the variance function is not estimable");
  }
  MaclOptions o;
  // Start away from the closed form so the solver does real work on it.
  o.init = std::vector<double>{std::log(mean_s2) + 1.0, 0.0};
  o.tol = tol;
  o.max_iter = max_iter;
  o.free = {true, false};
  return macl_fit(data, VarianceForm::ExpLinear, o);
}

double mle_homoscedastic(const PairedDataset& data) {
  if (data.empty()) throw ArgumentError("mle_homoscedastic needs at least one pair");
  double sum = 0.0;
  for (const auto& p : data.pairs()) {
    const double d = p.y1 - p.y2;
    sum += d * d / 4.0;
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace vfest
