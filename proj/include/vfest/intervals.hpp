#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "vfest/model.hpp"

namespace vfest {

struct Interval {
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();

  bool valid() const noexcept { return !(lo > hi) && !std::isnan(lo) && !std::isnan(hi); }
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  double width() const noexcept { return hi - lo; }
};

// exp of both endpoints: log-scale difference to abundance ratio.
Interval to_ratio(const Interval& log_interval);

// Union of disjoint sorted intervals. Components may be half-infinite when
// no bounds were applied. An empty set has no components and a NaN hull.
struct ConfidenceSet {
  std::vector<Interval> components;
  Interval hull;
  bool disconnected = false;
  double level = 0.95;
  // Set when the inversion used a dense grid instead of the closed-form
  // exp-linear structure.
  bool grid_fallback = false;

  bool empty() const noexcept { return components.empty(); }
  bool contains(double x) const noexcept;
};

// (y - mu)^2 / h(theta, mu)
double single_pivot(double y, const VarianceModel& model, double mu);

// {mu : (y - mu)^2 / h(mu) <= quantile}, optionally intersected with bounds.
// Exp-linear models use the closed-form local-extremum structure with
// bisection; other forms scan a dense grid over the bounds (required then).
ConfidenceSet invert_single_pivot(double y, const VarianceModel& model, double quantile,
                                  const std::optional<Bounds>& bounds);

// Sub-level set {mu in bounds : pivot(mu) <= q} of an arbitrary pivot,
// located by a uniform scan with bisection at each crossing.
std::vector<Interval> invert_on_grid(const std::function<double(double)>& pivot, double q,
                                     const Bounds& bounds, int points = 10000);

// Exact 1 - alpha set for one mean from one observation.
ConfidenceSet ci_mu_exact(double y, const VarianceModel& model, double alpha,
                          const std::optional<Bounds>& bounds = std::nullopt);

// y +/- z_{1-alpha/2} sqrt(h(theta, y)).
Interval ci_mu_naive(double y, const VarianceModel& model, double alpha);

// Standardized residuals of (Y1 - Y2, Y1 + Y2) at (nu1, nu2) = (mu1 - mu2,
// mu1 + mu2), their correlation and the chi-square(2) quadratic form.
struct DifferencePivot {
  double g_diff = 0.0;
  double g_sum = 0.0;
  double rho = 0.0;
  double g_quad = 0.0;
};

DifferencePivot difference_pivot(double y1, double y2, const VarianceModel& model, double nu1,
                                 double nu2);

inline constexpr double kDefaultGridRes = 0.005;

// Projection of the joint (nu1, nu2) region onto nu1, scanned on a grid of
// resolution grid_res over the parallelogram implied by bounds. Components
// are runs of accepted nu1 grid points.
ConfidenceSet ci_diff_region(double y1, double y2, const VarianceModel& model, double alpha,
                             const Bounds& bounds, double grid_res = kDefaultGridRes,
                             bool parallel = true);

// Whether the grid scan accepts a single nu1 value; equals
// ci_diff_region(...).contains(nu1) when nu1 lies on that grid (e.g. nu1 = 0).
bool region_accepts(double y1, double y2, const VarianceModel& model, double alpha,
                    const Bounds& bounds, double nu1, double grid_res = kDefaultGridRes);

// Difference of two bounded exact 1 - alpha/2 sets (via their hulls).
Interval ci_diff_bonferroni(double y1, double y2, const VarianceModel& model, double alpha,
                            const Bounds& bounds);

// y1 - y2 +/- z_{1-alpha/2} sqrt(h(y1) + h(y2)).
Interval ci_diff_naive(double y1, double y2, const VarianceModel& model, double alpha);

}  // namespace vfest
