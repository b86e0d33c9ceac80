#include "vfest/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace vfest::kernels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

struct SupportConstants {
  std::vector<double> base;     // log pi_j - log(2 pi) - log h_j
  std::vector<double> inv_2h;   // 1 / (2 h_j)
};

SupportConstants support_constants(const EStepInput& in) {
  const std::size_t J = in.mu.size();
  SupportConstants c;
  c.base.resize(J);
  c.inv_2h.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    c.base[j] = in.log_pi[j] - kLog2Pi - std::log(in.h[j]);
    c.inv_2h[j] = 0.5 / in.h[j];
  }
  return c;
}

// exp(x) for x <= 0, flushed to zero below e^-40 (under 1e-17 relative to
// the leading term, so invisible in a double-precision row sum).
inline double scaled_exp(double x) { return x > -40.0 ? std::exp(x) : 0.0; }

// Log joint terms for one row into `terms` and squared distances into
// `dist`; returns the log-sum-exp of the terms.
double row_terms(const EStepInput& in, const SupportConstants& c, std::size_t i,
                 std::span<double> terms, std::span<double> dist) {
  const std::size_t J = in.mu.size();
  const double y1 = in.y1[i];
  const double y2 = in.y2[i];
  double top = -kInf;
  for (std::size_t j = 0; j < J; ++j) {
    const double m = in.mu[j];
    const double r = (y1 - m) * (y1 - m) + (y2 - m) * (y2 - m);
    dist[j] = r;
    const double t = c.base[j] - r * c.inv_2h[j];
    terms[j] = t;
    top = std::max(top, t);
  }
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (std::size_t j = 0; j < J; ++j) acc += scaled_exp(terms[j] - top);
  return top + std::log(acc);
}

void init_output(EStepOutput& out, std::size_t N, std::size_t J) {
  out.log_lik = 0.0;
  out.row_log_lik.assign(N, 0.0);
  out.col_w.assign(J, 0.0);
  out.col_wr.assign(J, 0.0);
  out.bad_row.reset();
}

}  // namespace

EStepOutput estep_serial(const EStepInput& in, std::span<double> resp) {
  const std::size_t N = in.y1.size();
  const std::size_t J = in.mu.size();
  const SupportConstants c = support_constants(in);
  EStepOutput out;
  init_output(out, N, J);
  std::vector<double> terms(J), dist(J);
  for (std::size_t i = 0; i < N; ++i) {
    const double norm = row_terms(in, c, i, terms, dist);
    out.row_log_lik[i] = norm;
    if (!std::isfinite(norm)) {
      if (!out.bad_row) out.bad_row = i;
      continue;
    }
    out.log_lik += norm;
    for (std::size_t j = 0; j < J; ++j) {
      const double w = scaled_exp(terms[j] - norm);
      if (!resp.empty()) resp[i * J + j] = w;
      out.col_w[j] += w;
      out.col_wr[j] += w * dist[j];
    }
  }
  return out;
}

EStepOutput estep_parallel(const EStepInput& in, std::span<double> resp) {
  const std::size_t N = in.y1.size();
  const std::size_t J = in.mu.size();
  const SupportConstants c = support_constants(in);
  EStepOutput out;
  init_output(out, N, J);
  const std::size_t blocks = (N + kEStepBlock - 1) / kEStepBlock;
  // Per-block partials: [w | w*dist] for each block, plus log-lik.
  std::vector<double> partial(blocks * 2 * J, 0.0);
  std::vector<double> block_ll(blocks, 0.0);
  std::vector<std::size_t> block_bad(blocks, N);

#pragma omp parallel
  {
    std::vector<double> terms(J), dist(J);
#pragma omp for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks); ++bi) {
      const auto b = static_cast<std::size_t>(bi);
      double* pw = &partial[b * 2 * J];
      double* pr = pw + J;
      const std::size_t end = std::min(N, (b + 1) * kEStepBlock);
      for (std::size_t i = b * kEStepBlock; i < end; ++i) {
        const double norm = row_terms(in, c, i, terms, dist);
        out.row_log_lik[i] = norm;
        if (!std::isfinite(norm)) {
          block_bad[b] = std::min(block_bad[b], i);
          continue;
        }
        block_ll[b] += norm;
        for (std::size_t j = 0; j < J; ++j) {
          const double w = scaled_exp(terms[j] - norm);
          if (!resp.empty()) resp[i * J + j] = w;
          pw[j] += w;
          pr[j] += w * dist[j];
        }
      }
    }
  }

  for (std::size_t b = 0; b < blocks; ++b) {
    const double* pw = &partial[b * 2 * J];
    for (std::size_t j = 0; j < J; ++j) {
      out.col_w[j] += pw[j];
      out.col_wr[j] += pw[J + j];
    }
    out.log_lik += block_ll[b];
    if (block_bad[b] < N && !out.bad_row) out.bad_row = block_bad[b];
  }
  return out;
}

double region_quadratic(double y1, double y2, double t1, double t2, double nu1, double nu2) {
  const double h1 = std::exp(t1 + t2 * 0.5 * (nu2 + nu1));
  const double h2 = std::exp(t1 + t2 * 0.5 * (nu2 - nu1));
  const double total = h1 + h2;
  const double gd = (y1 - y2 - nu1);
  const double gs = (y1 + y2 - nu2);
  // With rho = (h1 - h2)/(h1 + h2) and g = residual / sqrt(h1 + h2),
  // (gd^2 - 2 rho gd gs + gs^2) / (1 - rho^2) simplifies to
  // ((gd^2 + gs^2)(h1 + h2) - 2 (h1 - h2) gd gs) / (4 h1 h2).
  return ((gd * gd + gs * gs) * total - 2.0 * (h1 - h2) * gd * gs) / (4.0 * h1 * h2);
}

namespace {

void scan_one(const RegionScanInput& in, std::size_t k, RegionScanOutput& out) {
  const double nu1 = in.nu1[k];
  const double lo = 2.0 * in.a + std::abs(nu1);
  const double hi = 2.0 * in.b - std::abs(nu1);
  double best = kInf;
  double arg = std::numeric_limits<double>::quiet_NaN();
  if (lo <= hi + 1e-12) {
    // ν2 grid anchored at the lower edge of the feasible segment.
    const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / in.step + 1e-9));
    for (std::size_t m = 0; m <= steps; ++m) {
      const double nu2 = lo + static_cast<double>(m) * in.step;
      const double qv = region_quadratic(in.y1, in.y2, in.t1, in.t2, nu1, nu2);
      if (qv < best) {
        best = qv;
        arg = nu2;
      }
    }
  }
  out.min_quad[k] = best;
  out.argmin_nu2[k] = arg;
  out.accepted[k] = best <= in.quantile ? 1 : 0;
}

void init_scan(const RegionScanInput& in, RegionScanOutput& out) {
  out.accepted.assign(in.nu1.size(), 0);
  out.min_quad.assign(in.nu1.size(), kInf);
  out.argmin_nu2.assign(in.nu1.size(), std::numeric_limits<double>::quiet_NaN());
}

}  // namespace

RegionScanOutput region_scan_serial(const RegionScanInput& in) {
  RegionScanOutput out;
  init_scan(in, out);
  for (std::size_t k = 0; k < in.nu1.size(); ++k) scan_one(in, k, out);
  return out;
}

RegionScanOutput region_scan_parallel(const RegionScanInput& in) {
  RegionScanOutput out;
  init_scan(in, out);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(in.nu1.size()); ++k) {
    scan_one(in, static_cast<std::size_t>(k), out);
  }
  return out;
}

}  // namespace vfest::kernels
