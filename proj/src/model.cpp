#include "vfest/model.hpp"

#include <cmath>
#include <string>

#include "vfest/errors.hpp"

namespace vfest {

std::string_view to_string(VarianceForm form) {
  switch (form) {
    case VarianceForm::ExpLinear:
      return "exp-linear";
    case VarianceForm::Power:
      return "power";
    case VarianceForm::ExpLinearPlusConst:
      return "exp-linear-const";
  }
  return "unknown";
}

VarianceForm parse_variance_form(std::string_view name) {
  if (name == "exp-linear") return VarianceForm::ExpLinear;
  if (name == "power") return VarianceForm::Power;
  if (name == "exp-linear-const") return VarianceForm::ExpLinearPlusConst;
  throw ArgumentError("unknown variance form '" + std::string(name) + "'");
}

std::size_t parameter_count(VarianceForm form) {
  return form == VarianceForm::ExpLinearPlusConst ? 3 : 2;
}

VarianceModel::VarianceModel(VarianceForm form, std::vector<double> theta)
    : form_(form), theta_(std::move(theta)) {
  if (theta_.size() != parameter_count(form_)) {
    throw ArgumentError(std::string(to_string(form_)) + " expects " +
                        std::to_string(parameter_count(form_)) + " coefficients, got " +
                        std::to_string(theta_.size()));
  }
  for (double t : theta_) {
    if (!std::isfinite(t)) throw ArgumentError("variance coefficients must be finite");
  }
}

namespace {

// Covariate entering the exponent: mu for the exp forms, log(mu) for Power.
double exponent_covariate(VarianceForm form, double mu) {
  if (form == VarianceForm::Power) {
    if (!(mu > 0.0)) {
      throw DomainError("power variance form requires mu > 0, got " + std::to_string(mu));
    }
    return std::log(mu);
  }
  return mu;
}

double checked(double h, double mu) {
  if (!std::isfinite(h) || !(h > 0.0)) {
    throw NumericalError("variance function evaluates to " + std::to_string(h) + " at mu=" +
                         std::to_string(mu));
  }
  return h;
}

}  // namespace

double VarianceModel::operator()(double mu) const {
  const double x = exponent_covariate(form_, mu);
  double h = std::exp(theta_[0] + theta_[1] * x);
  if (form_ == VarianceForm::ExpLinearPlusConst) h += std::exp(theta_[2]);
  return checked(h, mu);
}

VarianceDerivatives VarianceModel::derivatives(double mu) const {
  const double x = exponent_covariate(form_, mu);
  const double e = std::exp(theta_[0] + theta_[1] * x);
  VarianceDerivatives d;
  d.h = e;
  d.grad[0] = e;
  d.grad[1] = x * e;
  d.hess[0][0] = e;
  d.hess[0][1] = d.hess[1][0] = x * e;
  d.hess[1][1] = x * x * e;
  if (form_ == VarianceForm::ExpLinearPlusConst) {
    const double c = std::exp(theta_[2]);
    d.h += c;
    d.grad[2] = c;
    d.hess[2][2] = c;
  }
  checked(d.h, mu);
  return d;
}

VarianceModel VarianceModel::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ArgumentError("variance scale factor must be positive and finite");
  }
  auto theta = theta_;
  const double shift = std::log(factor);
  theta[0] += shift;
  if (form_ == VarianceForm::ExpLinearPlusConst) theta[2] += shift;
  return VarianceModel(form_, std::move(theta));
}

double variance_at(const VarianceModel& model, double mu) { return model(mu); }

void validate(const Bounds& bounds) {
  if (!std::isfinite(bounds.a) || !std::isfinite(bounds.b)) {
    throw ArgumentError("bounds must be finite");
  }
  if (bounds.a > bounds.b) {
    throw ArgumentError("bounds require a <= b, got a=" + std::to_string(bounds.a) +
                        " b=" + std::to_string(bounds.b));
  }
}

PairedDataset::PairedDataset(std::vector<PairedObservation> pairs, Bounds bounds)
    : pairs_(std::move(pairs)), bounds_(bounds) {
  validate(bounds_);
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (!std::isfinite(pairs_[i].y1) || !std::isfinite(pairs_[i].y2)) {
      throw DataError("non-finite intensity for pair '" + pairs_[i].id + "'", i + 1);
    }
  }
}

PairedDataset PairedDataset::from_values(std::span<const double> y1, std::span<const double> y2,
                                         Bounds bounds) {
  if (y1.size() != y2.size()) throw ArgumentError("y1 and y2 differ in length");
  std::vector<PairedObservation> pairs;
  pairs.reserve(y1.size());
  for (std::size_t i = 0; i < y1.size(); ++i) {
    pairs.push_back({"p" + std::to_string(i + 1), y1[i], y2[i]});
  }
  return PairedDataset(std::move(pairs), bounds);
}

PairStats pair_stats(double y1, double y2) {
  if (!std::isfinite(y1) || !std::isfinite(y2)) {
    throw ArgumentError("pair_stats requires finite intensities");
  }
  const double diff = y1 - y2;
  return {0.5 * (y1 + y2), 0.5 * diff * diff};
}

PairStats pair_stats(const PairedObservation& pair) { return pair_stats(pair.y1, pair.y2); }

EquationBias estimating_equation_bias(double t1, double t2, std::span<const double> mus) {
  if (mus.empty()) throw ArgumentError("estimating_equation_bias needs at least one mean");
  // With E(S^2) = h(mu) and E exp(-t2*Ybar) = exp(-t2*mu + t2^2 h(mu)/4), each
  // pair contributes excess = exp(t2^2 h/4) - 1. expm1 keeps t2 -> 0 accurate.
  double first = 0.0;
  double second = 0.0;
  for (double mu : mus) {
    const double h = std::exp(t1 + t2 * mu);
    const double excess = std::expm1(0.25 * t2 * t2 * h);
    first -= excess;
    second += -mu * excess + 0.5 * t2 * h * (1.0 + excess);
  }
  const double n = static_cast<double>(mus.size());
  return {first / n, second / n};
}

EquationBias estimating_equation_bias(const VarianceModel& model, std::span<const double> mus) {
  if (model.form() != VarianceForm::ExpLinear) {
    throw ArgumentError("estimating_equation_bias is defined for the exp-linear form only");
  }
  return estimating_equation_bias(model.theta()[0], model.theta()[1], mus);
}

}  // namespace vfest
