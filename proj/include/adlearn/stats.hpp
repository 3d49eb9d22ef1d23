#pragma once

// Scalar normal-distribution utilities with stable log-scale tails, plus the
// few extra log-densities the priors need. The log-CDF keeps relative
// accuracy far into the left tail, which the interval likelihood depends on.

#include <cmath>
#include <limits>

namespace adlearn {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm_pdf(double z);
double norm_logpdf(double z);
double norm_cdf(double z);
double norm_ccdf(double z);  // upper tail, 1 - Phi(z)
double norm_logcdf(double z);
double norm_logccdf(double z);

// Inverse standard normal CDF (Wichura's AS241, double precision).
double norm_quantile(double p);

// log(exp(a) - exp(b)) for a >= b; -inf when equal or when the difference
// underflows.
double log_diff_exp(double a, double b);

// log P(lo < Z <= hi) for standard normal Z with extended-real bounds.
// Returns -inf for empty or underflowing intervals; the caller decides how
// to floor.
double log_interval_prob_std(double lo, double hi);

double student_t_logpdf(double x, double nu, double mu, double sigma);
double exponential_logpdf(double x, double rate);

}  // namespace adlearn
