// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//
//   vfest_acceptance [--strict] [--only A3,A4]
//
// Without --strict the exit code reports only crashes, so a criterion that
// fails on its numbers still lets the remaining ones run and be reported.
// Environment:
//   VFEST_MIXTURE_REPS  replicates for A4 (default 50; tolerances scale with
//                       sqrt(200 / reps), 200 gives the unwidened bands)
//   VFEST_CONTROL_CSV   pooled control pairs for A11

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "vfest/hypothesis.hpp"
#include "vfest/intervals.hpp"
#include "vfest/io.hpp"
#include "vfest/macl.hpp"
#include "vfest/mixture_em.hpp"
#include "vfest/model.hpp"
#include "vfest/rng.hpp"
#include "vfest/simulate.hpp"

using namespace vfest;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Fail;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::ostringstream msg;

  void within(const std::string& what, double got, double want, double tol) {
    const bool good = std::abs(got - want) <= tol;
    ok = ok && good;
    note(what, got, good);
    msg << " (want " << want << " +/- " << tol << ")";
  }
  void at_most(const std::string& what, double got, double bound) {
    const bool good = got <= bound;
    ok = ok && good;
    note(what, got, good);
    msg << " (<= " << bound << ")";
  }
  void at_least(const std::string& what, double got, double bound) {
    const bool good = got >= bound;
    ok = ok && good;
    note(what, got, good);
    msg << " (>= " << bound << ")";
  }
  void truth(const std::string& what, bool good) {
    ok = ok && good;
    if (msg.tellp() > 0) msg << "; ";
    msg << what << (good ? "" : " [!]");
  }
  void note(const std::string& what, double got, bool good) {
    if (msg.tellp() > 0) msg << "; ";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.5g", got);
    msg << what << "=" << buf << (good ? "" : " [!]");
  }
  Outcome done() const { return {ok ? Status::Pass : Status::Fail, msg.str()}; }
};

std::vector<std::string> cli_lines(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"vfest"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) throw std::runtime_error("vfest exited " + std::to_string(code) + ": " + err.str());
  std::vector<std::string> lines;
  std::istringstream in(out.str());
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

Interval cli_ratio_ci(const std::string& method, double y1, double y2) {
  const auto lines = cli_lines({"ci", "--theta", "4.84,-0.927", "--y1", format_double(y1), "--y2",
                                format_double(y2), "--alpha", "0.05", "--method", method,
                                "--scale", "ratio", "--format", "csv", "--quiet"});
  const auto f = split_csv_line(lines.at(1));
  return {parse_double(f.at(2)), parse_double(f.at(3))};
}

struct Row {
  double y1, y2, lo, hi;
};

Outcome a1() {
  Check c;
  const Row rows[] = {{10.21, 10.78, 0.44, 0.72}, {11.45, 13.36, 0.13, 0.17}};
  for (const auto& r : rows) {
    const Interval iv = cli_ratio_ci("naive", r.y1, r.y2);
    c.within("lo", iv.lo, r.lo, 0.01);
    c.within("hi", iv.hi, r.hi, 0.01);
  }
  return c.done();
}

Outcome a2() {
  Check c;
  const Row rows[] = {{10.21, 10.78, 0.41, 0.76},
                      {13.62, 11.89, 5.05, 6.36},
                      {11.19, 9.92, 2.66, 5.05},
                      {10.83, 9.80, 2.03, 4.10},
                      {11.45, 13.36, 0.13, 0.17}};
  for (const auto& r : rows) {
    const Interval iv = cli_ratio_ci("region", r.y1, r.y2);
    c.within("lo", iv.lo, r.lo, 0.01);
    c.within("hi", iv.hi, r.hi, 0.01);
  }
  return c.done();
}

Scenario uniform_8_12() {
  Scenario s;
  s.kind = ScenarioKind::UniformContinuous;
  s.lo = 8.0;
  s.hi = 12.0;
  s.n = 2000;
  s.seed = 20240301;
  return s;
}

Outcome a3() {
  Check c;
  const Scenario s = uniform_8_12();
  const auto big = estimator_study(s, VarianceModel::exp_linear(5.0, -0.5), 200, Estimator::MACL);
  c.within("(5,-0.5) bias1", big.rows[0].mean_bias, -1.164, 0.06);
  c.within("bias2", big.rows[1].mean_bias, 0.120, 0.006);
  const auto small = estimator_study(s, VarianceModel::exp_linear(5.0, -1.0), 200, Estimator::MACL);
  c.at_most("(5,-1) |bias1|", std::abs(small.rows[0].mean_bias), 0.06);
  c.at_most("|bias2|", std::abs(small.rows[1].mean_bias), 0.006);
  return c.done();
}

Outcome a4() {
  Check c;
  std::size_t reps = 50;
  if (const char* env = std::getenv("VFEST_MIXTURE_REPS")) reps = std::stoul(env);
  const double widen = std::sqrt(200.0 / static_cast<double>(reps));
  const Scenario s = uniform_8_12();
  const auto r1 = estimator_study(s, VarianceModel::exp_linear(5.0, -1.0), reps, Estimator::Mixture);
  c.note("reps", static_cast<double>(reps), true);
  c.within("(5,-1) bias1", r1.rows[0].mean_bias, 0.173, 0.05 * widen);
  c.note("bias2", r1.rows[1].mean_bias, true);
  c.note("nonconverged", static_cast<double>(r1.nonconverged), true);
  const auto r2 = estimator_study(s, VarianceModel::exp_linear(5.0, -0.5), reps, Estimator::Mixture);
  c.at_most("(5,-0.5) |bias1|", std::abs(r2.rows[0].mean_bias), 0.07 * widen);
  c.note("bias2", r2.rows[1].mean_bias, true);
  return c.done();
}

Outcome a5() {
  Check c;
  Scenario s = uniform_8_12();
  s.n = 100000;
  const PairedDataset data = generate_dataset(s, VarianceModel::exp_linear(std::log(4.0), 0.0));
  c.within("mle", mle_homoscedastic(data), 2.0, 0.03);
  return c.done();
}

Outcome a6() {
  Check c;
  Rng cfg(777, 0);
  constexpr std::size_t kReps = 4000;
  for (int k = 0; k < 5; ++k) {
    const double t1 = cfg.uniform(3.0, 6.0);
    const double t2 = cfg.uniform(-1.0, -0.3);
    std::vector<double> mus(25);
    for (auto& m : mus) m = cfg.uniform(8.0, 12.0);
    const EquationBias exact = estimating_equation_bias(t1, t2, mus);

    // Monte Carlo: left-hand sides averaged over the pairs, one value per
    // simulated dataset.
    Rng rng(778, static_cast<std::uint64_t>(k) + 1);
    std::vector<double> e1(kReps), e2(kReps);
    for (std::size_t r = 0; r < kReps; ++r) {
      double s1 = 0.0, s2 = 0.0;
      for (double mu : mus) {
        const double sd = std::sqrt(std::exp(t1 + t2 * mu));
        const double y1 = rng.normal(mu, sd), y2 = rng.normal(mu, sd);
        const double ybar = 0.5 * (y1 + y2);
        const double ss = 0.5 * (y1 - y2) * (y1 - y2);
        const double w = ss * std::exp(-t1 - t2 * ybar);
        s1 += 1.0 - w;
        s2 += ybar - ybar * w;
      }
      e1[r] = s1 / static_cast<double>(mus.size());
      e2[r] = s2 / static_cast<double>(mus.size());
    }
    auto mean_se = [](const std::vector<double>& v) {
      const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      return std::pair{m, std::sqrt(ss / static_cast<double>(v.size() - 1) /
                                    static_cast<double>(v.size()))};
    };
    const auto [m1, se1] = mean_se(e1);
    const auto [m2, se2] = mean_se(e2);
    c.truth("cfg" + std::to_string(k + 1) + " z1=" + std::to_string((m1 - exact.first) / se1).substr(0, 5) +
                " z2=" + std::to_string((m2 - exact.second) / se2).substr(0, 5),
            std::abs(m1 - exact.first) <= 3 * se1 && std::abs(m2 - exact.second) <= 3 * se2);
  }
  const std::vector<double> mus{7.5, 9.0, 12.5};
  const EquationBias zero = estimating_equation_bias(4.2, 0.0, mus);
  c.truth("theta2=0 gives (0,0)", zero.first == 0.0 && zero.second == 0.0);
  return c.done();
}

Outcome a7() {
  Check c;
  CoverageConfig cfg;
  cfg.theta_true = cfg.theta_fit = VarianceModel::exp_linear(5.0, -1.0);
  cfg.mu_grid = {7.5, 9.0, 11.0, 13.0};
  cfg.reps = 100000;
  cfg.seed = 7;
  cfg.methods = {CoverageMethod::Exact};
  for (const auto& row : coverage_study(cfg).rows) {
    c.within("mu=" + format_double(row.mu), row.coverage, 0.95, 0.006);
  }
  return c.done();
}

Outcome a8() {
  Check c;
  CoverageConfig cfg;
  cfg.theta_true = cfg.theta_fit = VarianceModel::exp_linear(5.0, -0.5);
  cfg.mu_grid = {7.0, 13.0};
  cfg.alpha = 0.01;
  cfg.reps = 100000;
  cfg.seed = 8;
  cfg.methods = {CoverageMethod::Naive};
  const auto rows = coverage_study(cfg).rows;
  c.at_most("mu=7", rows[0].coverage, 0.975);
  c.at_least("mu=13", rows[1].coverage, 0.985);
  return c.done();
}

Outcome a9() {
  Check c;
  auto validity = [&](const VarianceModel& theta, std::vector<double> mus, std::uint64_t seed) {
    PowerConfig cfg;
    cfg.theta = theta;
    cfg.mu_grid = std::move(mus);
    cfg.k_grid = {0.0};
    cfg.reps = 10000;
    cfg.seed = seed;
    const auto report = power_study(cfg);
    for (const auto& row : report.rows) {
      if (row.method == TestMethod::Naive) continue;
      const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(cfg.reps));
      c.at_most(std::string(to_string(row.method)) + "(" + format_double(theta.theta()[1]) +
                    ",mu=" + format_double(row.mu) + ")",
                row.rejection_rate, 0.05 + 3 * se);
    }
  };
  validity(VarianceModel::exp_linear(5.0, -1.0), {8.0, 10.0, 12.0}, 91);
  validity(VarianceModel::exp_linear(5.0, -0.5), {7.5, 8.0, 10.0, 12.0}, 92);

  PowerConfig naive;
  naive.theta = VarianceModel::exp_linear(5.0, -0.5);
  naive.mu_grid = {7.0, 7.5, 8.0};
  naive.k_grid = {0.0};
  naive.reps = 10000;
  naive.seed = 93;
  double peak = 0.0;
  for (const auto& row : power_study(naive).rows) {
    if (row.method == TestMethod::Naive) peak = std::max(peak, row.rejection_rate);
  }
  c.at_least("naive peak", peak, 0.05);
  c.at_most("naive peak", peak, 0.10);
  return c.done();
}

Outcome a10() {
  Check c;
  Rng cfg(1010, 0);
  bool monotone = true, pi_ok = true, rows_ok = true;
  double worst_drop = 0.0;
  for (int k = 0; k < 50; ++k) {
    // N <= 50 pairs, J <= 10 support points.
    Scenario s;
    s.lo = cfg.uniform(7.5, 9.0);
    s.hi = s.lo + cfg.uniform(2.0, 4.0);
    s.n = 10 + cfg.below(41);
    s.seed = 5000 + static_cast<std::uint64_t>(k);
    const VarianceModel theta = VarianceModel::exp_linear(cfg.uniform(2.0, 5.0), cfg.uniform(-1.0, -0.3));
    const PairedDataset data = generate_dataset(s, theta);
    SupportGrid grid;
    const std::size_t J = 1 + cfg.below(10);
    for (std::size_t j = 0; j < J; ++j) {
      grid.points.push_back(J == 1 ? s.hi : s.lo + (s.hi - s.lo) * static_cast<double>(j) / static_cast<double>(J - 1));
    }
    EmOptions opt;
    opt.record_trace = true;
    const MixtureEstimate est = em_fit(data, grid, theta, opt);
    for (std::size_t i = 1; i < est.log_lik_trace.size(); ++i) {
      const double drop = est.log_lik_trace[i - 1] - est.log_lik_trace[i];
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-8) monotone = false;
    }
    const double total = std::accumulate(est.pi_hat.begin(), est.pi_hat.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) pi_ok = false;
    const ResponsibilityMatrix w = responsibilities(data, est.model(), grid, est.pi_hat);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      const auto row = w.row(i);
      if (std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) > 1e-12) rows_ok = false;
    }
  }
  c.truth("log-lik non-decreasing", monotone);
  c.note("worst drop", worst_drop, monotone);
  c.truth("pi sums to 1", pi_ok);
  c.truth("responsibility rows sum to 1", rows_ok);
  return c.done();
}

Outcome a11() {
  const char* path = std::getenv("VFEST_CONTROL_CSV");
  if (!path) return {Status::Skip, "VFEST_CONTROL_CSV not set; public control dataset absent"};
  Check c;
  ReadOptions opt;
  const ReadResult data = read_pairs_csv(std::string(path), opt);
  const FitResult macl = macl_fit(data.data, VarianceForm::ExpLinear);
  c.within("macl t1", macl.theta_hat[0], 4.86, 0.02);
  c.within("macl t2", macl.theta_hat[1], -0.927, 0.02);
  const MixtureFit mix = fit_mixture(data.data, VarianceForm::ExpLinear);
  c.within("em t1", mix.estimate.theta_hat[0], 4.84, 0.03);
  c.within("em t2", mix.estimate.theta_hat[1], -0.927, 0.03);
  return c.done();
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--strict") {
      strict = true;
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string id; std::getline(ss, id, ',');) only.insert(id);
    } else {
      std::fprintf(stderr, "usage: vfest_acceptance [--strict] [--only A1,A2,...]\n");
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4},  {"A5", a5},  {"A6", a6},
      {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11},
  };
  int failed = 0, errors = 0;
  std::printf("acceptance: %d OpenMP thread(s)\n", omp_get_max_threads());
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("error: ") + e.what()};
      ++errors;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* label = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    if (o.status == Status::Fail) ++failed;
    std::printf("%-4s %s  %s  [%.1fs]\n", id.c_str(), label, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("acceptance: %d criterion(s) failed\n", failed);
  if (errors) return 1;
  return strict && failed ? 1 : 0;
}
