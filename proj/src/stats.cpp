#include "adlearn/stats.hpp"

#include <cstdlib>

namespace adlearn {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;
constexpr double kHalfLog2Pi = 0.9189385332046727417803297364056176;
}  // namespace

double norm_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  return std::exp(-0.5 * z * z - kHalfLog2Pi);
}

double norm_logpdf(double z) {
  if (std::isinf(z)) return -kInf;
  return -0.5 * z * z - kHalfLog2Pi;
}

double norm_cdf(double z) {
  if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
  // erfc keeps relative accuracy in the left tail; the right tail saturates
  // at 1 which is fine in linear scale.
  return 0.5 * std::erfc(-z * kInvSqrt2);
}

double norm_ccdf(double z) { return norm_cdf(-z); }

// Asymptotic expansion of log Phi(z) for z << 0:
//   log phi(z) - log(-z) + log(1 - 1/z^2 + 3/z^4 - ...).
// The alternating series is summed until it stops changing.
static double logcdf_left_tail(double z) {
  const double zsq = z * z;
  double term = 1.0;
  double sum = 1.0;
  double prev = 0.0;
  double sign = 1.0;
  double numer = 1.0;
  int i = 0;
  while (std::fabs(sum - prev) > std::numeric_limits<double>::epsilon() * std::fabs(sum)) {
    prev = sum;
    ++i;
    sign = -sign;
    numer *= 2 * i - 1;
    term /= zsq;
    sum += sign * numer * term;
    if (i > 40) break;
  }
  return -0.5 * zsq - kHalfLog2Pi - std::log(-z) + std::log(sum);
}

double norm_logcdf(double z) {
  if (std::isinf(z)) return z > 0 ? 0.0 : -kInf;
  if (z < -20.0) return logcdf_left_tail(z);
  if (z > 6.0) return -norm_ccdf(z);  // log(1-x) ~ -x
  return std::log(norm_cdf(z));
}

double norm_logccdf(double z) { return norm_logcdf(-z); }

// AS241 (Wichura 1988), the double precision branch.
double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    return kNaN;
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

double log_diff_exp(double a, double b) {
  if (a < b) return kNaN;
  if (a == b) return -kInf;
  if (b == -kInf) return a;
  // a + log(1 - exp(b-a)); expm1 keeps accuracy when b ~ a.
  return a + std::log(-std::expm1(b - a));
}

double log_interval_prob_std(double lo, double hi) {
  if (!(lo < hi)) return -kInf;
  if (lo == -kInf && hi == kInf) return 0.0;
  if (lo == -kInf) return norm_logcdf(hi);
  if (hi == kInf) return norm_logccdf(lo);
  if (lo >= 0.0) {
    // Both bounds in the right tail: work with complementary CDFs.
    return log_diff_exp(norm_logccdf(lo), norm_logccdf(hi));
  }
  if (hi <= 0.0) {
    return log_diff_exp(norm_logcdf(hi), norm_logcdf(lo));
  }
  // Interval straddles zero; the mass cannot underflow.
  const double p = norm_cdf(hi) - norm_cdf(lo);
  return p > 0.0 ? std::log(p) : -kInf;
}

double student_t_logpdf(double x, double nu, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * M_PI) - std::log(sigma) -
         0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double exponential_logpdf(double x, double rate) {
  if (x < 0.0) return -kInf;
  return std::log(rate) - rate * x;
}

}  // namespace adlearn
