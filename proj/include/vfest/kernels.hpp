#pragma once

// Data-parallel inner loops. Each kernel has a plain serial reference and an
// OpenMP version. The OpenMP versions reduce over fixed-size row blocks in
// block order, so their output does not depend on the thread count. The
// serial references sum row by row and are kept to test the parallel code.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace vfest::kernels {

// Rows per reduction block in the parallel E-step.
inline constexpr std::size_t kEStepBlock = 256;

struct EStepInput {
  std::span<const double> y1;
  std::span<const double> y2;
  std::span<const double> mu;      // support points
  std::span<const double> h;       // variance at each support point
  std::span<const double> log_pi;  // log mixing weights (may be -inf)
};

struct EStepOutput {
  double log_lik = 0.0;
  std::vector<double> row_log_lik;  // log sum_j pi_j f(y_i | mu_j)
  std::vector<double> col_w;        // sum_i w_ij
  std::vector<double> col_wr;       // sum_i w_ij [(y1 - mu_j)^2 + (y2 - mu_j)^2]
  std::optional<std::size_t> bad_row;  // first row whose mixture density is not finite
};

// `resp`, when non-empty, receives the N x J responsibilities row-major.
EStepOutput estep_serial(const EStepInput& in, std::span<double> resp = {});
EStepOutput estep_parallel(const EStepInput& in, std::span<double> resp = {});

// Bivariate ν-region scan for one pair: for each ν1 candidate, whether some
// ν2 on the grid inside the bounded parallelogram gives a quadratic form at
// or below `quantile`. Also reports the minimizing ν2 (NaN if none feasible).
struct RegionScanInput {
  double y1 = 0.0;
  double y2 = 0.0;
  double a = 0.0;
  double b = 0.0;
  double quantile = 0.0;
  double t1 = 0.0;  // exp-linear variance coefficients
  double t2 = 0.0;
  double step = 0.005;
  std::span<const double> nu1;
};

struct RegionScanOutput {
  std::vector<unsigned char> accepted;
  std::vector<double> min_quad;
  std::vector<double> argmin_nu2;
};

RegionScanOutput region_scan_serial(const RegionScanInput& in);
RegionScanOutput region_scan_parallel(const RegionScanInput& in);

// Quadratic form of the standardized (Y1-Y2, Y1+Y2) residuals at (ν1, ν2)
// under exp-linear variance.
double region_quadratic(double y1, double y2, double t1, double t2, double nu1, double nu2);

}  // namespace vfest::kernels
