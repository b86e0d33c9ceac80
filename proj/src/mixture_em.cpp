#include "vfest/mixture_em.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vfest/errors.hpp"
#include "vfest/kernels.hpp"
#include "vfest/macl.hpp"
#include "vfest/solver.hpp"

namespace vfest {

SupportGrid build_support(const VarianceModel& theta_tilde, double a, double b, double d) {
  if (!std::isfinite(a) || !std::isfinite(b) || a > b) {
    throw ArgumentError("build_support requires finite a <= b");
  }
  if (!(d > 0.0) || !std::isfinite(d)) throw ArgumentError("build_support requires d > 0");
  SupportGrid grid;
  grid.spacing_d = d;
  std::vector<double> desc{b};
  while (desc.back() > a) {
    const double next = desc.back() - d * std::sqrt(theta_tilde(desc.back()));
    if (!(next < desc.back())) {
      throw NumericalError("support recursion stalled at mu=" + std::to_string(desc.back()));
    }
    desc.push_back(next > a ? next : a);
    if (desc.size() > kMaxSupportPoints) {
      throw NumericalError("support grid exceeds " + std::to_string(kMaxSupportPoints) +
                           " points; variance or d too small");
    }
  }
  grid.points.assign(desc.rbegin(), desc.rend());
  return grid;
}

namespace {

struct Columns {
  std::vector<double> y1, y2;
};

Columns split(const PairedDataset& data) {
  Columns c;
  c.y1.reserve(data.size());
  c.y2.reserve(data.size());
  for (const auto& p : data.pairs()) {
    c.y1.push_back(p.y1);
    c.y2.push_back(p.y2);
  }
  return c;
}

void check_pi(std::span<const double> pi, std::size_t J) {
  if (pi.size() != J) throw ArgumentError("pi length does not match the grid");
  double total = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ArgumentError("pi entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("pi must sum to 1");
}

std::vector<double> variances(const VarianceModel& model, const SupportGrid& grid) {
  std::vector<double> h(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) h[j] = model(grid.points[j]);
  return h;
}

std::vector<double> logs(std::span<const double> pi) {
  std::vector<double> out(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) {
    out[j] = pi[j] > 0.0 ? std::log(pi[j]) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

kernels::EStepOutput run_estep(const Columns& c, const SupportGrid& grid,
                               std::span<const double> h, std::span<const double> log_pi,
                               bool parallel, std::span<double> resp = {}) {
  const kernels::EStepInput in{c.y1, c.y2, grid.points, h, log_pi};
  return parallel ? kernels::estep_parallel(in, resp) : kernels::estep_serial(in, resp);
}

void throw_bad_row(const PairedDataset& data, std::size_t row) {
  throw NumericalError("mixture density underflows for pair '" + data[row].id + "' (row " +
                       std::to_string(row + 1) + ")");
}

}  // namespace

ResponsibilityMatrix responsibilities(const PairedDataset& data, const VarianceModel& theta,
                                      const SupportGrid& grid, std::span<const double> pi) {
  if (grid.points.empty()) throw ArgumentError("empty support grid");
  check_pi(pi, grid.size());
  const Columns c = split(data);
  const auto h = variances(theta, grid);
  const auto log_pi = logs(pi);
  ResponsibilityMatrix w(data.size(), grid.size());
  const auto e = run_estep(c, grid, h, log_pi, true, w.data());
  if (e.bad_row) throw_bad_row(data, *e.bad_row);
  return w;
}

double mixture_log_lik(const PairedDataset& data, const VarianceModel& theta,
                       const SupportGrid& grid, std::span<const double> pi) {
  if (grid.points.empty()) throw ArgumentError("empty support grid");
  check_pi(pi, grid.size());
  const Columns c = split(data);
  const auto h = variances(theta, grid);
  const auto log_pi = logs(pi);
  const auto e = run_estep(c, grid, h, log_pi, true);
  if (e.bad_row) throw_bad_row(data, *e.bad_row);
  return e.log_lik;
}

MixtureEstimate em_fit(const PairedDataset& data, const SupportGrid& grid,
                       const VarianceModel& init_theta, const EmOptions& options) {
  if (data.size() < 3) throw ArgumentError("em_fit needs at least 3 pairs");
  if (grid.points.empty()) throw ArgumentError("em_fit needs a nonempty grid");
  const std::size_t J = grid.size();
  const VarianceForm form = init_theta.form();
  const Columns c = split(data);

  MixtureEstimate est;
  est.form = form;
  est.theta_hat = init_theta.theta();
  est.pi_hat.assign(J, 1.0 / static_cast<double>(J));

  auto estep = [&](const std::vector<double>& theta, const std::vector<double>& pi) {
    const auto h = variances(VarianceModel(form, theta), grid);
    const auto log_pi = logs(pi);
    auto e = run_estep(c, grid, h, log_pi, options.parallel);
    if (e.bad_row) throw_bad_row(data, *e.bad_row);
    return e;
  };

  kernels::EStepOutput e = estep(est.theta_hat, est.pi_hat);
  est.log_lik = e.log_lik;
  if (options.record_trace) est.log_lik_trace.push_back(e.log_lik);

  std::vector<double> s2(J), weight(J);
  SolverOptions so;
  so.tol = options.inner_tol;
  so.max_iter = options.inner_max_iter;

  for (int iter = 0; iter < options.max_iter; ++iter) {
    // M-step for pi.
    std::vector<double> pi(J);
    const double total = std::accumulate(e.col_w.begin(), e.col_w.end(), 0.0);
    for (std::size_t j = 0; j < J; ++j) pi[j] = e.col_w[j] / total;

    // M-step for theta: sum_j W_j [-log h_j - R_j / (2 h_j)] is the
    // variance regression with weight 2 W_j and statistic R_j / (2 W_j).
    for (std::size_t j = 0; j < J; ++j) {
      weight[j] = 2.0 * e.col_w[j];
      s2[j] = e.col_w[j] > 0.0 ? e.col_wr[j] / (2.0 * e.col_w[j]) : 0.0;
    }
    const VarianceRegressionData reg{grid.points, s2, weight};
    std::vector<double> theta = est.theta_hat;
    try {
      const SolverResult s = solve_variance_regression(form, reg, est.theta_hat, so);
      // Generalized EM: keep the old theta unless the M-step objective improved.
      const double before = evaluate_score(form, reg, est.theta_hat).objective;
      if (s.objective >= before) theta = s.theta;
    } catch (const NumericalError&) {
    }

    kernels::EStepOutput next = estep(theta, pi);
    est.iterations = iter + 1;
    if (options.record_trace) est.log_lik_trace.push_back(next.log_lik);
    if (next.log_lik < e.log_lik - 1e-8) {
      throw NumericalError("EM log-likelihood decreased from " + std::to_string(e.log_lik) +
                           " to " + std::to_string(next.log_lik) + " at iteration " +
                           std::to_string(iter + 1));
    }
    const double change = std::abs(next.log_lik - e.log_lik);
    est.theta_hat = std::move(theta);
    est.pi_hat = std::move(pi);
    est.log_lik = next.log_lik;
    const double previous = e.log_lik;
    e = std::move(next);
    if (change < options.tol * std::abs(previous)) {
      est.converged = true;
      break;
    }
  }
  return est;
}

MixtureFit fit_mixture(const PairedDataset& data, VarianceForm form, double d,
                       const EmOptions& options) {
  MixtureFit out;
  const FitResult start = macl_fit(data, form);
  out.init_theta = start.theta_hat;
  out.grid = build_support(start.model(), data.bounds().a, data.bounds().b, d);
  out.estimate = em_fit(data, out.grid, start.model(), options);
  return out;
}

}  // namespace vfest
