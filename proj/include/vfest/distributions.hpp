#pragma once

// Normal and chi-squared quantiles/tails used for interval inversion and
// p-values. Backed by Boost.Math.

namespace vfest::dist {

double normal_quantile(double p);
// Upper-tail quantile: the value q with P(chi2_df > q) = upper_tail.
double chi2_upper_quantile(double df, double upper_tail);
// P(chi2_df > x).
double chi2_survival(double df, double x);

// 1-df quantile at level 1 - alpha.
inline double chi2_1_quantile(double alpha) { return chi2_upper_quantile(1.0, alpha); }
// 2-df quantile at level 1 - alpha. Closed form -2 log(alpha).
double chi2_2_quantile(double alpha);

}  // namespace vfest::dist
