#include "adlearn/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace adlearn {

namespace {

// Robert (1995): accept-reject for the one-sided tail Z > a with a > 0,
// exponential proposal at the optimal rate.
double tail_sample(double a, KeyedRng& rng) {
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (int iter = 0; iter < 10000; ++iter) {
    const double e = -std::log(rng.next_u01()) / alpha;
    const double x = a + e;
    const double diff = x - alpha;
    if (rng.next_u01() <= std::exp(-0.5 * diff * diff)) return x;
  }
  return a;  // unreachable at the acceptance rates involved
}

}  // namespace

double truncated_std_normal(double lo, double hi, KeyedRng& rng) {
  if (!(lo < hi)) throw std::domain_error("truncated_std_normal: empty interval");
  if (lo == -kInf && hi == kInf) return rng.next_normal();

  constexpr double kTailCut = 6.0;
  if (lo >= kTailCut && hi == kInf) return tail_sample(lo, rng);
  if (hi <= -kTailCut && lo == -kInf) return -tail_sample(-hi, rng);

  // Two-sided (or moderate one-sided): invert the CDF inside the interval,
  // using the complementary representation when both bounds sit in the
  // right tail so precision does not collapse against 1.
  if (lo >= 0.0) {
    const double qlo = norm_ccdf(lo);
    const double qhi = hi == kInf ? 0.0 : norm_ccdf(hi);
    const double u = qhi + (qlo - qhi) * rng.next_u01();
    if (u <= 0.0) {
      // Underflowed sliver: rejection against the lower bound's tail.
      for (int iter = 0; iter < 10000; ++iter) {
        const double x = tail_sample(lo, rng);
        if (x < hi) return x;
      }
      return lo;
    }
    return -norm_quantile(u);
  }
  if (hi <= 0.0) {
    const double plo = lo == -kInf ? 0.0 : norm_cdf(lo);
    const double phi = norm_cdf(hi);
    const double u = plo + (phi - plo) * rng.next_u01();
    if (u <= 0.0) {
      for (int iter = 0; iter < 10000; ++iter) {
        const double x = -tail_sample(-hi, rng);
        if (x > lo) return x;
      }
      return hi;
    }
    return norm_quantile(u);
  }
  const double plo = lo == -kInf ? 0.0 : norm_cdf(lo);
  const double phi = hi == kInf ? 1.0 : norm_cdf(hi);
  return norm_quantile(plo + (phi - plo) * rng.next_u01());
}

}  // namespace adlearn
