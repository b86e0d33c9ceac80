#include "vfest/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "vfest/distributions.hpp"
#include "vfest/errors.hpp"
#include "vfest/kernels.hpp"

namespace vfest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ArgumentError("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
}

// Bisection on a bracket [inside, outside] where pivot(inside) <= q <
// pivot(outside). Runs to machine precision (at most 200 halvings) and
// returns the last point known to be inside.
template <class G>
double bisect_boundary(G&& pivot, double inside, double outside, double q) {
  for (int step = 0; step < 200; ++step) {
    const double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) break;
    if (pivot(mid) <= q) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return inside;
}

ConfidenceSet finish(std::vector<Interval> comps, const std::optional<Bounds>& bounds) {
  ConfidenceSet set;
  for (auto c : comps) {
    if (bounds) {
      c.lo = std::max(c.lo, bounds->a);
      c.hi = std::min(c.hi, bounds->b);
      if (c.lo > c.hi) continue;
    }
    set.components.push_back(c);
  }
  std::sort(set.components.begin(), set.components.end(),
            [](const Interval& l, const Interval& r) { return l.lo < r.lo; });
  if (!set.components.empty()) {
    set.hull = {set.components.front().lo, set.components.back().hi};
  }
  set.disconnected = set.components.size() > 1;
  return set;
}

// Closed-form structure for h = exp(t1 + t2 mu) with t2 < 0: g has a local
// minimum 0 at y and a local maximum at mu* = y + 2/t2.
std::vector<Interval> invert_exp_linear_decreasing(double y, double t1, double t2, double q) {
  auto g = [&](double mu) { return (y - mu) * (y - mu) * std::exp(-t1 - t2 * mu); };
  std::vector<Interval> comps;

  // Right root r2 > y: expand by doubling until the pivot exceeds q.
  double step = 1.0;
  double inside = y;
  double outside = y + step;
  while (g(outside) <= q) {
    inside = outside;
    step *= 2.0;
    outside = y + step;
  }
  const double r2 = bisect_boundary(g, inside, outside, q);

  const double mu_star = y + 2.0 / t2;
  const double g_star = 4.0 / (t2 * t2) * std::exp(-(2.0 + t1 + t2 * y));
  if (g_star <= q) {
    comps.push_back({-kInf, r2});
    return comps;
  }
  // l2 in (mu*, y): g falls from g_star to 0.
  const double l2 = bisect_boundary(g, y, mu_star, q);
  // r1 < mu*: g rises from 0 at -inf to g_star; expand left from mu*.
  step = 1.0;
  outside = mu_star;
  inside = mu_star - step;
  while (g(inside) > q) {
    outside = inside;
    step *= 2.0;
    inside = mu_star - step;
  }
  const double r1 = bisect_boundary(g, inside, outside, q);
  comps.push_back({-kInf, r1});
  comps.push_back({l2, r2});
  return comps;
}

}  // namespace

std::vector<Interval> invert_on_grid(const std::function<double(double)>& pivot, double q,
                                     const Bounds& bounds, int points) {
  validate(bounds);
  if (points < 2) throw ArgumentError("grid inversion needs at least 2 points");
  std::vector<Interval> comps;
  if (bounds.a == bounds.b) {
    if (pivot(bounds.a) <= q) comps.push_back({bounds.a, bounds.a});
    return comps;
  }
  const double step = bounds.width() / points;
  double prev_mu = bounds.a;
  bool prev_in = pivot(prev_mu) <= q;
  double start = bounds.a;
  for (int k = 1; k <= points; ++k) {
    const double mu = k == points ? bounds.b : bounds.a + step * k;
    const bool in = pivot(mu) <= q;
    if (in && !prev_in) start = bisect_boundary(pivot, mu, prev_mu, q);
    if (!in && prev_in) comps.push_back({start, bisect_boundary(pivot, prev_mu, mu, q)});
    prev_in = in;
    prev_mu = mu;
  }
  if (prev_in) comps.push_back({start, bounds.b});
  return comps;
}

Interval to_ratio(const Interval& log_interval) {
  return {std::exp(log_interval.lo), std::exp(log_interval.hi)};
}

bool ConfidenceSet::contains(double x) const noexcept {
  return std::any_of(components.begin(), components.end(),
                     [x](const Interval& c) { return c.contains(x); });
}

double single_pivot(double y, const VarianceModel& model, double mu) {
  return (y - mu) * (y - mu) / model(mu);
}

ConfidenceSet invert_single_pivot(double y, const VarianceModel& model, double quantile,
                                  const std::optional<Bounds>& bounds) {
  if (!std::isfinite(y)) throw ArgumentError("observation must be finite");
  if (!(quantile > 0.0)) throw ArgumentError("pivot quantile must be positive");
  if (bounds) validate(*bounds);
  if (model.form() == VarianceForm::ExpLinear) {
    const double t1 = model.theta()[0];
    const double t2 = model.theta()[1];
    std::vector<Interval> comps;
    if (t2 == 0.0) {
      const double half = std::sqrt(quantile * std::exp(t1));
      comps.push_back({y - half, y + half});
    } else if (t2 < 0.0) {
      comps = invert_exp_linear_decreasing(y, t1, t2, quantile);
    } else {
      // Mirror image: mu -> -mu maps the increasing case onto the decreasing one.
      for (const auto& c : invert_exp_linear_decreasing(-y, t1, -t2, quantile)) {
        comps.push_back({-c.hi, -c.lo});
      }
    }
    return finish(std::move(comps), bounds);
  }
  if (!bounds) {
    throw ArgumentError(std::string(to_string(model.form())) +
                        " form needs finite bounds for grid inversion");
  }
  auto pivot = [&](double mu) { return single_pivot(y, model, mu); };
  ConfidenceSet set = finish(invert_on_grid(pivot, quantile, *bounds), bounds);
  set.grid_fallback = true;
  return set;
}

ConfidenceSet ci_mu_exact(double y, const VarianceModel& model, double alpha,
                          const std::optional<Bounds>& bounds) {
  check_alpha(alpha);
  ConfidenceSet set = invert_single_pivot(y, model, dist::chi2_1_quantile(alpha), bounds);
  set.level = 1.0 - alpha;
  return set;
}

Interval ci_mu_naive(double y, const VarianceModel& model, double alpha) {
  check_alpha(alpha);
  const double half = dist::normal_quantile(1.0 - alpha / 2.0) * std::sqrt(model(y));
  return {y - half, y + half};
}

DifferencePivot difference_pivot(double y1, double y2, const VarianceModel& model, double nu1,
                                 double nu2) {
  const double h1 = model(0.5 * (nu2 + nu1));
  const double h2 = model(0.5 * (nu2 - nu1));
  const double scale = std::sqrt(h1 + h2);
  DifferencePivot p;
  p.g_diff = (y1 - y2 - nu1) / scale;
  p.g_sum = (y1 + y2 - nu2) / scale;
  p.rho = (h1 - h2) / (h1 + h2);
  p.g_quad = (p.g_diff * p.g_diff - 2.0 * p.rho * p.g_diff * p.g_sum + p.g_sum * p.g_sum) /
             (1.0 - p.rho * p.rho);
  return p;
}

ConfidenceSet ci_diff_region(double y1, double y2, const VarianceModel& model, double alpha,
                             const Bounds& bounds, double grid_res, bool parallel) {
  check_alpha(alpha);
  validate(bounds);
  if (!(grid_res > 0.0) || !std::isfinite(grid_res)) {
    throw ArgumentError("grid_res must be positive");
  }
  if (model.form() != VarianceForm::ExpLinear) {
    throw ArgumentError("ci_diff_region supports the exp-linear form only");
  }
  if (!std::isfinite(y1) || !std::isfinite(y2)) throw ArgumentError("observations must be finite");

  // nu1 grid symmetric about 0 so that swapping (y1, y2) negates the set exactly.
  const auto K = static_cast<long>(std::floor(bounds.width() / grid_res + 1e-9));
  std::vector<double> nu1(static_cast<std::size_t>(2 * K + 1));
  for (long k = -K; k <= K; ++k) nu1[static_cast<std::size_t>(k + K)] = grid_res * static_cast<double>(k);

  kernels::RegionScanInput in;
  in.y1 = y1;
  in.y2 = y2;
  in.a = bounds.a;
  in.b = bounds.b;
  in.quantile = dist::chi2_2_quantile(alpha);
  in.t1 = model.theta()[0];
  in.t2 = model.theta()[1];
  in.step = grid_res;
  in.nu1 = nu1;
  const auto scan = parallel ? kernels::region_scan_parallel(in) : kernels::region_scan_serial(in);

  std::vector<Interval> comps;
  for (std::size_t k = 0; k < nu1.size(); ++k) {
    if (!scan.accepted[k]) continue;
    const bool continues = k > 0 && scan.accepted[k - 1];
    if (continues) {
      comps.back().hi = nu1[k];
    } else {
      comps.push_back({nu1[k], nu1[k]});
    }
  }
  if (comps.empty()) {
    throw NumericalError("confidence region for the difference is empty on the grid (y1=" +
                         std::to_string(y1) + ", y2=" + std::to_string(y2) + ")");
  }
  ConfidenceSet set = finish(std::move(comps), std::nullopt);
  set.level = 1.0 - alpha;
  return set;
}

bool region_accepts(double y1, double y2, const VarianceModel& model, double alpha,
                    const Bounds& bounds, double nu1, double grid_res) {
  check_alpha(alpha);
  validate(bounds);
  if (model.form() != VarianceForm::ExpLinear) {
    throw ArgumentError("region_accepts supports the exp-linear form only");
  }
  const double candidates[] = {nu1};
  kernels::RegionScanInput in;
  in.y1 = y1;
  in.y2 = y2;
  in.a = bounds.a;
  in.b = bounds.b;
  in.quantile = dist::chi2_2_quantile(alpha);
  in.t1 = model.theta()[0];
  in.t2 = model.theta()[1];
  in.step = grid_res;
  in.nu1 = candidates;
  return kernels::region_scan_serial(in).accepted[0] != 0;
}

Interval ci_diff_bonferroni(double y1, double y2, const VarianceModel& model, double alpha,
                            const Bounds& bounds) {
  check_alpha(alpha);
  const ConfidenceSet s1 = ci_mu_exact(y1, model, alpha / 2.0, bounds);
  const ConfidenceSet s2 = ci_mu_exact(y2, model, alpha / 2.0, bounds);
  if (s1.empty() || s2.empty()) {
    throw NumericalError("bounded confidence set for a single mean is empty");
  }
  return {s1.hull.lo - s2.hull.hi, s1.hull.hi - s2.hull.lo};
}

Interval ci_diff_naive(double y1, double y2, const VarianceModel& model, double alpha) {
  check_alpha(alpha);
  const double half =
      dist::normal_quantile(1.0 - alpha / 2.0) * std::sqrt(model(y1) + model(y2));
  return {y1 - y2 - half, y1 - y2 + half};
}

}  // namespace vfest
