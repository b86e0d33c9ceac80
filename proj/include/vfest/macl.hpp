#pragma once

#include <optional>
#include <vector>

#include "vfest/model.hpp"

namespace vfest {

struct FitResult {
  VarianceForm form = VarianceForm::ExpLinear;
  std::vector<double> theta_hat;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;  // max |normalized estimating equation|

  VarianceModel model() const { return VarianceModel(form, theta_hat); }
};

struct MaclOptions {
  std::optional<std::vector<double>> init;
  double tol = 1e-9;
  int max_iter = 200;
  // Pinned parameters (false) stay at their init value.
  std::vector<bool> free;
};

// Least-squares line of log(S^2 + 1e-12) on the pair means (log pair means
// for Power). The constant term of ExpLinearPlusConst starts at half the
// smallest fitted exp-linear variance.
std::vector<double> macl_default_init(const PairedDataset& data, VarianceForm form);

// Maximum approximate conditional likelihood: maximizes
//   prod_i h(theta, Ybar_i)^{-1/2} exp{-S_i^2 / (2 h(theta, Ybar_i))}.
// Throws ConvergenceError (with best iterate) when max_iter is exhausted and
// DataError when every pair is tied.
FitResult macl_fit(const PairedDataset& data, VarianceForm form, const MaclOptions& options = {});

// Constant-variance model, expressed as ExpLinear with t2 pinned at 0.
FitResult macl_fit_homoscedastic(const PairedDataset& data, double tol = 1e-9,
                                 int max_iter = 200);

// Plain MLE of a common variance, N^-1 sum (y1 - y2)^2 / 4. Converges to half
// the true variance; kept as the inconsistent baseline.
double mle_homoscedastic(const PairedDataset& data);

}  // namespace vfest
