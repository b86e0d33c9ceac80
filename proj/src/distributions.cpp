#include "vfest/distributions.hpp"

#include <cmath>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "vfest/errors.hpp"

namespace vfest::dist {

namespace {

void check_probability(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ArgumentError(std::string(what) + " must lie in (0,1), got " + std::to_string(p));
  }
}

}  // namespace

double normal_quantile(double p) {
  check_probability(p, "normal quantile probability");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double chi2_upper_quantile(double df, double upper_tail) {
  check_probability(upper_tail, "chi-squared tail probability");
  return boost::math::quantile(
      boost::math::complement(boost::math::chi_squared_distribution<double>(df), upper_tail));
}

double chi2_survival(double df, double x) {
  if (std::isnan(x)) throw ArgumentError("chi-squared survival at NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::cdf(
      boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double chi2_2_quantile(double alpha) {
  check_probability(alpha, "alpha");
  return -2.0 * std::log(alpha);
}

}  // namespace vfest::dist
