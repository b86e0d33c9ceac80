#include "vfest/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "vfest/errors.hpp"
#include "vfest/intervals.hpp"
#include "vfest/io.hpp"
#include "vfest/macl.hpp"
#include "vfest/mixture_em.hpp"
#include "vfest/rng.hpp"

namespace vfest {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Replicate r draws from substream r + 1; stream 0 is the study-wide stream.
std::uint64_t replicate_stream(std::uint64_t replicate) { return replicate + 1; }

std::vector<double> resample(const std::vector<double>& source, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (auto& m : out) m = source[rng.below(source.size())];
  return out;
}

std::string fmt(double x) { return format_double(x); }

double proportion_se(double p, std::size_t reps) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
}

}  // namespace

void validate(const Scenario& s) {
  if (s.n == 0) throw ArgumentError("scenario needs n >= 1");
  switch (s.kind) {
    case ScenarioKind::FixedResample:
    case ScenarioKind::RandomResample:
      if (s.source_means.empty()) throw ArgumentError("resample scenarios need source means");
      for (double m : s.source_means) {
        if (!std::isfinite(m)) throw ArgumentError("source means must be finite");
      }
      break;
    case ScenarioKind::UniformContinuous:
      if (!(s.lo < s.hi) || !std::isfinite(s.lo) || !std::isfinite(s.hi)) {
        throw ArgumentError("uniform scenario needs finite lo < hi");
      }
      break;
    case ScenarioKind::UniformDiscrete:
      if (s.lo != std::floor(s.lo) || s.hi != std::floor(s.hi) || s.lo > s.hi) {
        throw ArgumentError("discrete scenario needs integer lo <= hi");
      }
      break;
  }
  if (s.bounds) validate(*s.bounds);
}

Bounds scenario_bounds(const Scenario& s) {
  if (s.bounds) return *s.bounds;
  switch (s.kind) {
    case ScenarioKind::FixedResample:
    case ScenarioKind::RandomResample: {
      const auto [lo, hi] = std::minmax_element(s.source_means.begin(), s.source_means.end());
      return {*lo, *hi};
    }
    case ScenarioKind::UniformContinuous:
    case ScenarioKind::UniformDiscrete:
      break;
  }
  return {s.lo, s.hi};
}

std::string describe(const Scenario& s) {
  switch (s.kind) {
    case ScenarioKind::FixedResample:
      return "fixed";
    case ScenarioKind::RandomResample:
      return "random";
    case ScenarioKind::UniformContinuous:
      return "uniform:" + fmt(s.lo) + "," + fmt(s.hi);
    case ScenarioKind::UniformDiscrete:
      return "discrete:" + fmt(s.lo) + "," + fmt(s.hi);
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view text) {
  Scenario s;
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  auto range = [&]() {
    if (colon == std::string_view::npos) throw ArgumentError("scenario needs LO,HI");
    const std::string rest(text.substr(colon + 1));
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw ArgumentError("scenario needs LO,HI");
    try {
      s.lo = std::stod(rest.substr(0, comma));
      s.hi = std::stod(rest.substr(comma + 1));
    } catch (const std::exception&) {
      throw ArgumentError("scenario range '" + rest + "' is not numeric");
    }
  };
  if (kind == "uniform") {
    s.kind = ScenarioKind::UniformContinuous;
    range();
  } else if (kind == "discrete") {
    s.kind = ScenarioKind::UniformDiscrete;
    range();
  } else if (kind == "fixed") {
    s.kind = ScenarioKind::FixedResample;
  } else if (kind == "random") {
    s.kind = ScenarioKind::RandomResample;
  } else {
    throw ArgumentError("unknown scenario '" + std::string(text) + "'");
  }
  return s;
}

std::vector<double> draw_means(const Scenario& s, std::uint64_t replicate) {
  validate(s);
  switch (s.kind) {
    case ScenarioKind::FixedResample: {
      Rng study(s.seed, 0);
      return resample(s.source_means, s.n, study);
    }
    case ScenarioKind::RandomResample: {
      // Separate from the replicate's noise stream.
      Rng rng(splitmix64(s.seed), replicate_stream(replicate));
      return resample(s.source_means, s.n, rng);
    }
    case ScenarioKind::UniformContinuous: {
      Rng rng(splitmix64(s.seed), replicate_stream(replicate));
      std::vector<double> out(s.n);
      for (auto& m : out) m = rng.uniform(s.lo, s.hi);
      return out;
    }
    case ScenarioKind::UniformDiscrete: {
      Rng rng(splitmix64(s.seed), replicate_stream(replicate));
      const auto count = static_cast<std::uint64_t>(s.hi - s.lo) + 1;
      std::vector<double> out(s.n);
      for (auto& m : out) m = s.lo + static_cast<double>(rng.below(count));
      return out;
    }
  }
  return {};
}

PairedDataset generate_dataset(const Scenario& s, const VarianceModel& theta,
                               std::uint64_t replicate) {
  const std::vector<double> means = draw_means(s, replicate);
  Rng rng(s.seed, replicate_stream(replicate));
  std::vector<PairedObservation> pairs(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    const double sd = std::sqrt(theta(means[i]));
    pairs[i].id = "sim" + std::to_string(i + 1);
    pairs[i].y1 = rng.normal(means[i], sd);
    pairs[i].y2 = rng.normal(means[i], sd);
  }
  return PairedDataset(std::move(pairs), scenario_bounds(s));
}

std::string_view to_string(Estimator e) { return e == Estimator::MACL ? "macl" : "mixture"; }

Estimator parse_estimator(std::string_view name) {
  if (name == "macl") return Estimator::MACL;
  if (name == "mixture") return Estimator::Mixture;
  throw ArgumentError("unknown estimator '" + std::string(name) + "'");
}

EstimatorReport estimator_study(const Scenario& scenario, const VarianceModel& theta,
                                std::size_t reps, Estimator method,
                                const EstimatorOptions& options) {
  validate(scenario);
  if (reps < 2) throw ArgumentError("estimator_study needs reps >= 2");
  const auto start = Clock::now();
  const std::size_t p = theta.size();

  struct Outcome {
    std::vector<double> theta;
    bool failed = false;
    bool converged = true;
  };
  std::vector<Outcome> outcomes(reps);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(reps); ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    Outcome& out = outcomes[r];
    try {
      const PairedDataset data = generate_dataset(scenario, theta, r);
      if (method == Estimator::MACL) {
        out.theta = macl_fit(data, theta.form()).theta_hat;
      } else {
        EmOptions em;
        em.tol = options.em_tol;
        em.max_iter = options.em_max_iter;
        // Replicates already run in parallel.
        em.parallel = false;
        const MixtureFit fit = fit_mixture(data, theta.form(), options.d, em);
        out.theta = fit.estimate.theta_hat;
        out.converged = fit.estimate.converged;
      }
    } catch (const std::exception&) {
      out.failed = true;
    }
  }

  EstimatorReport report;
  report.method = method;
  report.scenario = describe(scenario);
  report.n = scenario.n;
  report.reps = reps;
  report.seed = scenario.seed;
  for (const auto& o : outcomes) {
    if (o.failed) {
      ++report.failures;
      continue;
    }
    if (!o.converged) ++report.nonconverged;
    report.estimates.push_back(o.theta);
  }
  if (report.failures * 10 > reps) {
    throw NumericalError("estimator study: " + std::to_string(report.failures) + " of " +
                         std::to_string(reps) + " fits failed");
  }
  const auto ok = static_cast<double>(report.estimates.size());
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (const auto& e : report.estimates) mean += e[j];
    mean /= ok;
    double ss = 0.0;
    for (const auto& e : report.estimates) ss += (e[j] - mean) * (e[j] - mean);
    ParameterRow row;
    row.name = "theta" + std::to_string(j + 1);
    row.true_value = theta.theta()[j];
    row.mean_bias = mean - row.true_value;
    row.std_dev = ok > 1 ? std::sqrt(ss / (ok - 1.0)) : 0.0;
    report.rows.push_back(row);
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

std::string_view to_string(CoverageMethod m) {
  switch (m) {
    case CoverageMethod::Exact:
      return "exact";
    case CoverageMethod::Naive:
      return "naive";
    case CoverageMethod::Region:
      return "region";
    case CoverageMethod::Bonferroni:
      return "bonferroni";
    case CoverageMethod::NaiveDiff:
      return "naive-diff";
  }
  return "unknown";
}

CoverageMethod parse_coverage_method(std::string_view name) {
  for (auto m : {CoverageMethod::Exact, CoverageMethod::Naive, CoverageMethod::Region,
                 CoverageMethod::Bonferroni, CoverageMethod::NaiveDiff}) {
    if (to_string(m) == name) return m;
  }
  throw ArgumentError("unknown coverage method '" + std::string(name) + "'");
}

namespace {

bool is_single(CoverageMethod m) {
  return m == CoverageMethod::Exact || m == CoverageMethod::Naive;
}

bool covers(CoverageMethod m, const CoverageConfig& c, double mu, double y1, double y2) {
  switch (m) {
    case CoverageMethod::Exact:
      return ci_mu_exact(y1, c.theta_fit, c.alpha).contains(mu);
    case CoverageMethod::Naive:
      return ci_mu_naive(y1, c.theta_fit, c.alpha).contains(mu);
    case CoverageMethod::Region:
      return region_accepts(y1, y2, c.theta_fit, c.alpha, c.bounds, 0.0, c.grid_res);
    case CoverageMethod::Bonferroni:
      return ci_diff_bonferroni(y1, y2, c.theta_fit, c.alpha, c.bounds).contains(0.0);
    case CoverageMethod::NaiveDiff:
      return ci_diff_naive(y1, y2, c.theta_fit, c.alpha).contains(0.0);
  }
  return false;
}

}  // namespace

CoverageReport coverage_study(const CoverageConfig& c) {
  if (c.reps < 1) throw ArgumentError("coverage_study needs reps >= 1");
  if (c.methods.empty()) throw ArgumentError("coverage_study needs at least one method");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
  const bool single = is_single(c.methods.front());
  for (auto m : c.methods) {
    if (is_single(m) != single) {
      throw ArgumentError("coverage_study cannot mix single-mean and difference methods");
    }
  }
  const auto start = Clock::now();
  CoverageReport report;
  report.mode = single ? "single" : "difference";
  report.level = 1.0 - c.alpha;
  report.reps = c.reps;
  report.seed = c.seed;

  const std::size_t M = c.methods.size();
  for (std::size_t gi = 0; gi < c.mu_grid.size(); ++gi) {
    const double mu = c.mu_grid[gi];
    const double sd = std::sqrt(c.theta_true(mu));
    std::vector<unsigned char> hit(c.reps * M, 0);
    bool failed = false;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(c.reps); ++ri) {
      const auto r = static_cast<std::size_t>(ri);
      // One substream per (grid point, replicate).
      Rng rng(c.seed, replicate_stream(gi * c.reps + r));
      const double y1 = rng.normal(mu, sd);
      const double y2 = single ? y1 : rng.normal(mu, sd);
      try {
        for (std::size_t m = 0; m < M; ++m) hit[r * M + m] = covers(c.methods[m], c, mu, y1, y2);
      } catch (const std::exception&) {
#pragma omp atomic write
        failed = true;
      }
    }
    if (failed) throw NumericalError("coverage study: interval construction failed");
    for (std::size_t m = 0; m < M; ++m) {
      std::size_t count = 0;
      for (std::size_t r = 0; r < c.reps; ++r) count += hit[r * M + m];
      CoverageRow row;
      row.mu = mu;
      row.method = c.methods[m];
      row.coverage = static_cast<double>(count) / static_cast<double>(c.reps);
      row.std_error = proportion_se(row.coverage, c.reps);
      report.rows.push_back(row);
    }
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

PowerReport power_study(const PowerConfig& c) {
  if (c.reps < 1) throw ArgumentError("power_study needs reps >= 1");
  if (!(c.beta > 0.0 && c.beta < 1.0)) throw ArgumentError("beta must lie in (0,1)");
  validate(c.bounds);
  const auto start = Clock::now();
  PowerReport report;
  report.reps = c.reps;
  report.seed = c.seed;
  report.beta = c.beta;
  report.level = c.level;
  constexpr TestMethod kMethods[] = {TestMethod::Naive, TestMethod::Conservative,
                                     TestMethod::BergerBoos};
  std::uint64_t cell = 0;
  for (double mu : c.mu_grid) {
    for (double k : c.k_grid) {
      const double sd1 = std::sqrt(c.theta(mu));
      const double mu_k = mu + k * sd1;
      const double sd2 = std::sqrt(c.theta(mu_k));
      std::vector<unsigned char> reject(c.reps * 3, 0);
      const std::uint64_t base = cell * c.reps;
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(c.reps); ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        Rng rng(c.seed, replicate_stream(base + r));
        const double y1 = rng.normal(mu, sd1);
        const double y2 = rng.normal(mu_k, sd2);
        reject[r * 3 + 0] = pvalue_naive(y1, y2, c.theta).p_value <= c.level;
        reject[r * 3 + 1] = pvalue_conservative(y1, y2, c.theta, c.bounds).p_value <= c.level;
        reject[r * 3 + 2] =
            pvalue_berger_boos(y1, y2, c.theta, c.bounds, c.beta).p_value <= c.level;
      }
      for (std::size_t m = 0; m < 3; ++m) {
        std::size_t count = 0;
        for (std::size_t r = 0; r < c.reps; ++r) count += reject[r * 3 + m];
        PowerRow row;
        row.mu = mu;
        row.k = k;
        row.method = kMethods[m];
        row.rejection_rate = static_cast<double>(count) / static_cast<double>(c.reps);
        row.std_error = proportion_se(row.rejection_rate, c.reps);
        report.rows.push_back(row);
      }
      ++cell;
    }
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

std::string to_csv(const EstimatorReport& r) {
  std::ostringstream os;
  os << "method,scenario,n,param,true_value,mean_bias,std,reps,failures,nonconverged,seed,rng\n";
  for (const auto& row : r.rows) {
    os << to_string(r.method) << ',' << r.scenario << ',' << r.n << ',' << row.name << ','
       << fmt(row.true_value) << ',' << fmt(row.mean_bias) << ',' << fmt(row.std_dev) << ','
       << r.reps << ',' << r.failures << ',' << r.nonconverged << ',' << r.seed << ','
       << Rng::kAlgorithm << '\n';
  }
  return os.str();
}

std::string to_csv(const CoverageReport& r) {
  std::ostringstream os;
  os << "mode,mu,method,level,coverage,noncoverage,se,reps,seed,rng\n";
  for (const auto& row : r.rows) {
    os << r.mode << ',' << fmt(row.mu) << ',' << to_string(row.method) << ',' << fmt(r.level)
       << ',' << fmt(row.coverage) << ',' << fmt(1.0 - row.coverage) << ','
       << fmt(row.std_error) << ',' << r.reps << ',' << r.seed << ',' << Rng::kAlgorithm << '\n';
  }
  return os.str();
}

std::string to_csv(const PowerReport& r) {
  std::ostringstream os;
  os << "mu,k,method,rejection_rate,se,level,beta,reps,seed,rng\n";
  for (const auto& row : r.rows) {
    os << fmt(row.mu) << ',' << fmt(row.k) << ',' << to_string(row.method) << ','
       << fmt(row.rejection_rate) << ',' << fmt(row.std_error) << ',' << fmt(r.level) << ','
       << fmt(r.beta) << ',' << r.reps << ',' << r.seed << ',' << Rng::kAlgorithm << '\n';
  }
  return os.str();
}

}  // namespace vfest
