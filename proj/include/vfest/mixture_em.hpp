#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vfest/model.hpp"

namespace vfest {

// Support points for the mixing distribution, spaced at most d standard
// deviations apart under a preliminary variance fit.
struct SupportGrid {
  std::vector<double> points;  // strictly increasing, last == b, first >= a
  double spacing_d = 0.25;

  std::size_t size() const noexcept { return points.size(); }
};

inline constexpr std::size_t kMaxSupportPoints = 1'000'000;

// mu_J = b, mu_{j-1} = mu_j - d sqrt(h(theta_tilde, mu_j)), lowest point
// clamped to a. Throws NumericalError past kMaxSupportPoints.
SupportGrid build_support(const VarianceModel& theta_tilde, double a, double b, double d = 0.25);

class ResponsibilityMatrix {
 public:
  ResponsibilityMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), w_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return w_[i * cols_ + j]; }
  std::span<double> data() noexcept { return w_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(w_).subspan(i * cols_, cols_);
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> w_;
};

// Posterior probability that pair i has mean mu_j, computed in log space.
// Throws NumericalError naming the pair when its mixture density vanishes.
ResponsibilityMatrix responsibilities(const PairedDataset& data, const VarianceModel& theta,
                                      const SupportGrid& grid, std::span<const double> pi);

// sum_i log sum_j pi_j f(y_i; theta | mu_j), with f the bivariate normal
// density of a pair sharing mean mu_j.
double mixture_log_lik(const PairedDataset& data, const VarianceModel& theta,
                       const SupportGrid& grid, std::span<const double> pi);

struct EmOptions {
  double tol = 1e-8;        // relative log-likelihood change
  int max_iter = 2000;
  double inner_tol = 1e-9;  // M-step theta solver
  int inner_max_iter = 200;
  bool parallel = true;     // OpenMP E-step kernel
  bool record_trace = false;
};

struct MixtureEstimate {
  VarianceForm form = VarianceForm::ExpLinear;
  std::vector<double> theta_hat;
  std::vector<double> pi_hat;
  double log_lik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_lik_trace;  // one entry per E-step when recorded

  VarianceModel model() const { return VarianceModel(form, theta_hat); }
};

// EM over a frozen grid, starting from uniform pi. Throws NumericalError if
// the log-likelihood drops by more than 1e-8 between iterations.
MixtureEstimate em_fit(const PairedDataset& data, const SupportGrid& grid,
                       const VarianceModel& init_theta, const EmOptions& options = {});

// MACL start, variance-adaptive grid on data.bounds(), then EM.
struct MixtureFit {
  MixtureEstimate estimate;
  SupportGrid grid;
  std::vector<double> init_theta;
};

MixtureFit fit_mixture(const PairedDataset& data, VarianceForm form, double d = 0.25,
                       const EmOptions& options = {});

}  // namespace vfest
