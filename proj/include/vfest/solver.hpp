#pragma once

#include <span>
#include <vector>

#include "vfest/model.hpp"

namespace vfest {

// Weighted variance regression shared by the MACL fit and the EM M-step:
//
//   maximize  sum_k w_k * { -1/2 log h(theta, x_k) - s2_k / (2 h(theta, x_k)) }
//
// whose score equations are sum_k w_k dh/dtheta_j (s2_k - h) / h^2 = 0.
// The reported residual is that score divided by sum_k w_k, in max-norm.
struct VarianceRegressionData {
  std::span<const double> x;       // location at which h is evaluated
  std::span<const double> s2;      // observed variance statistic
  std::span<const double> weight;  // empty means unit weights
};

struct SolverOptions {
  double tol = 1e-9;
  int max_iter = 200;
  // Parameters not flagged free keep their initial value. Empty means all free.
  std::vector<bool> free;
};

struct SolverResult {
  std::vector<double> theta;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  double objective = 0.0;
  bool used_simplex = false;
};

// Objective and normalized score at theta. Returns -inf objective when h is
// not finite somewhere.
struct ScoreEvaluation {
  double objective = 0.0;
  std::vector<double> score;  // normalized by total weight
  double residual_norm = 0.0;
};

ScoreEvaluation evaluate_score(VarianceForm form, const VarianceRegressionData& data,
                               std::span<const double> theta);

// Damped Newton on the estimating equations with an analytic Hessian.
// Falls back to Nelder-Mead on the squared score norm when the Hessian is
// singular or the line search stalls, then resumes Newton from there.
SolverResult solve_variance_regression(VarianceForm form, const VarianceRegressionData& data,
                                       std::span<const double> init,
                                       const SolverOptions& options = {});

// Minimizes f over R^n with the Nelder-Mead simplex. Exposed for testing.
struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
};

template <class F>
SimplexResult nelder_mead(F&& f, std::vector<double> start, double initial_step, double ftol,
                          int max_evaluations);

}  // namespace vfest

#include "vfest/detail/nelder_mead.ipp"
