#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vfest/hypothesis.hpp"
#include "vfest/model.hpp"

namespace vfest {

// How the latent means of a simulated dataset are drawn.
//   FixedResample      resample source_means once per study
//   RandomResample     resample source_means for every replicate
//   UniformContinuous  U(lo, hi)
//   UniformDiscrete    uniform on the integers lo..hi
enum class ScenarioKind { FixedResample, RandomResample, UniformContinuous, UniformDiscrete };

struct Scenario {
  ScenarioKind kind = ScenarioKind::UniformContinuous;
  double lo = 8.0;
  double hi = 12.0;
  std::vector<double> source_means;
  std::size_t n = 2000;
  std::uint64_t seed = 1;
  // Bounds attached to generated datasets. Defaults to the scenario's
  // support: [lo, hi] for uniform kinds, [min, max] of source_means otherwise.
  std::optional<Bounds> bounds;
};

void validate(const Scenario& scenario);
Bounds scenario_bounds(const Scenario& scenario);
std::string describe(const Scenario& scenario);
// uniform:LO,HI | discrete:LO,HI | fixed | random (means supplied separately)
Scenario parse_scenario(std::string_view text);

// Means for one replicate. Replicate indices start at 0; stream 0 of the
// seed is reserved for the study-wide FixedResample draw.
std::vector<double> draw_means(const Scenario& scenario, std::uint64_t replicate = 0);

// y1, y2 ~ N(mu_i, h(theta, mu_i)) independently. Deterministic in
// (scenario.seed, replicate).
PairedDataset generate_dataset(const Scenario& scenario, const VarianceModel& theta,
                               std::uint64_t replicate = 0);

enum class Estimator { MACL, Mixture };
std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view name);

struct ParameterRow {
  std::string name;  // theta1, theta2, ...
  double true_value = 0.0;
  double mean_bias = 0.0;
  double std_dev = 0.0;
};

struct EstimatorReport {
  Estimator method = Estimator::MACL;
  std::string scenario;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  std::size_t nonconverged = 0;  // mixture fits that hit max_iter
  std::uint64_t seed = 0;
  std::vector<ParameterRow> rows;
  std::vector<std::vector<double>> estimates;  // successful replicates, in order
  double wall_seconds = 0.0;
};

struct EstimatorOptions {
  double d = 0.25;
  double em_tol = 1e-8;
  int em_max_iter = 2000;
};

// Throws NumericalError when more than 10% of replicates fail.
EstimatorReport estimator_study(const Scenario& scenario, const VarianceModel& theta,
                                std::size_t reps, Estimator method,
                                const EstimatorOptions& options = {});

enum class CoverageMethod { Exact, Naive, Region, Bonferroni, NaiveDiff };
std::string_view to_string(CoverageMethod m);
CoverageMethod parse_coverage_method(std::string_view name);

struct CoverageRow {
  double mu = 0.0;
  CoverageMethod method = CoverageMethod::Exact;
  double coverage = 0.0;
  double std_error = 0.0;
};

struct CoverageReport {
  std::string mode;  // "single" or "difference"
  double level = 0.95;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<CoverageRow> rows;
  double wall_seconds = 0.0;
};

struct CoverageConfig {
  VarianceModel theta_true = VarianceModel::exp_linear(5.0, -1.0);
  VarianceModel theta_fit = VarianceModel::exp_linear(5.0, -1.0);
  std::vector<double> mu_grid{7.5, 9.0, 11.0, 13.0};
  double alpha = 0.05;
  std::size_t reps = 100000;
  std::uint64_t seed = 1;
  std::vector<CoverageMethod> methods{CoverageMethod::Exact, CoverageMethod::Naive};
  Bounds bounds{};         // used by the difference methods
  double grid_res = 0.005;  // region method
};

// Single-observation methods (Exact unbounded, Naive) simulate y ~ N(mu, h);
// difference methods (Region, Bonferroni, NaiveDiff) simulate null pairs with
// common mean mu and record coverage of nu1 = 0. A config may not mix them.
CoverageReport coverage_study(const CoverageConfig& config);

struct PowerRow {
  double mu = 0.0;
  double k = 0.0;
  TestMethod method = TestMethod::Naive;
  double rejection_rate = 0.0;
  double std_error = 0.0;
};

struct PowerReport {
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  double beta = kDefaultBetaSimulation;
  double level = 0.05;
  std::vector<PowerRow> rows;
  double wall_seconds = 0.0;
};

struct PowerConfig {
  VarianceModel theta = VarianceModel::exp_linear(5.0, -1.0);
  std::vector<double> mu_grid{8.0, 10.0, 12.0};
  std::vector<double> k_grid{0.0, 1.0, 2.0, 3.0};
  std::size_t reps = 10000;
  double beta = kDefaultBetaSimulation;
  double level = 0.05;
  Bounds bounds{};
  std::uint64_t seed = 1;
};

// Y1 ~ N(mu, h(mu)), Y2 ~ N(mu_k, h(mu_k)) with mu_k = mu + k sqrt(h(mu));
// proportion of p-values <= level for each method.
PowerReport power_study(const PowerConfig& config);

// CSV renderings, one row per table cell. No timing information, so equal
// inputs give byte-identical output.
std::string to_csv(const EstimatorReport& report);
std::string to_csv(const CoverageReport& report);
std::string to_csv(const PowerReport& report);

}  // namespace vfest
