#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vfest {

// Functional forms of the variance function h(theta, mu) on the natural-log
// intensity scale.
//   ExpLinear           h = exp(t1 + t2*mu)
//   Power               h = exp(t1) * mu^t2          (mu > 0)
//   ExpLinearPlusConst  h = exp(t1 + t2*mu) + exp(t3)
enum class VarianceForm { ExpLinear, Power, ExpLinearPlusConst };

std::string_view to_string(VarianceForm form);
// Accepts the CLI spellings: exp-linear, power, exp-linear-const.
VarianceForm parse_variance_form(std::string_view name);
std::size_t parameter_count(VarianceForm form);

// h together with its first and second derivatives in theta.
struct VarianceDerivatives {
  double h = 0.0;
  std::array<double, 3> grad{};
  std::array<std::array<double, 3>, 3> hess{};
};

class VarianceModel {
 public:
  VarianceModel(VarianceForm form, std::vector<double> theta);

  static VarianceModel exp_linear(double t1, double t2) {
    return VarianceModel(VarianceForm::ExpLinear, {t1, t2});
  }

  VarianceForm form() const noexcept { return form_; }
  const std::vector<double>& theta() const noexcept { return theta_; }
  std::size_t size() const noexcept { return theta_.size(); }

  // Throws DomainError for Power at mu <= 0 and NumericalError when the
  // result is not a finite positive number.
  double operator()(double mu) const;
  VarianceDerivatives derivatives(double mu) const;

  // Same form with the variance scaled by `factor` (> 0). Only defined for
  // forms where scaling stays within the family, which is all three.
  VarianceModel scaled(double factor) const;

 private:
  VarianceForm form_;
  std::vector<double> theta_;
};

double variance_at(const VarianceModel& model, double mu);

struct PairedObservation {
  std::string id;
  double y1 = 0.0;
  double y2 = 0.0;
};

// Assumed support [a, b] of the latent means. a == b is allowed and pins
// every mean to a single value.
struct Bounds {
  double a = 7.3;
  double b = 13.9;

  bool contains(double mu) const noexcept { return mu >= a && mu <= b; }
  double width() const noexcept { return b - a; }
};

void validate(const Bounds& bounds);

class PairedDataset {
 public:
  PairedDataset() = default;
  // Validates finiteness and bounds. Does not drop tied pairs; see
  // read_pairs_csv for the ingestion filter.
  explicit PairedDataset(std::vector<PairedObservation> pairs, Bounds bounds = {});

  static PairedDataset from_values(std::span<const double> y1, std::span<const double> y2,
                                   Bounds bounds = {});

  const std::vector<PairedObservation>& pairs() const noexcept { return pairs_; }
  const PairedObservation& operator[](std::size_t i) const { return pairs_[i]; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const Bounds& bounds() const noexcept { return bounds_; }

 private:
  std::vector<PairedObservation> pairs_;
  Bounds bounds_;
};

struct PairStats {
  double ybar = 0.0;
  double s2 = 0.0;  // (y1 - y2)^2 / 2
};

PairStats pair_stats(const PairedObservation& pair);
PairStats pair_stats(double y1, double y2);

// Exact expectations of the left-hand sides of the two ExpLinear MACL
// estimating equations
//   1 - mean(S^2 exp(-t1 - t2*Ybar))
//   mean(Ybar) - mean(Ybar S^2 exp(-t1 - t2*Ybar))
// evaluated at the true theta with latent means `mus`. Both are zero only in
// the homoscedastic case t2 == 0.
struct EquationBias {
  double first = 0.0;
  double second = 0.0;
};

EquationBias estimating_equation_bias(double t1, double t2, std::span<const double> mus);
EquationBias estimating_equation_bias(const VarianceModel& model, std::span<const double> mus);

}  // namespace vfest
