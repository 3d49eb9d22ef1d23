#pragma once

// Structural quantities of the direct-buy ad market model: advertiser and
// site parameters, beta-binomial CTR beliefs, match, subscription menus,
// expected payoffs and the weekly choice rule. Everything here is an
// immutable value and a pure function.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adlearn {

// Currency is carried as integer cents so that spend/revenue accounting
// identities hold exactly.
using Cents = std::int64_t;

inline double cents_to_dollars(Cents c) { return static_cast<double>(c) / 100.0; }

inline Cents dollars_to_cents(double dollars) {
  return static_cast<Cents>(std::llround(dollars * 100.0));
}

struct AdvertiserParams {
  double gamma;  // prior/reference CTR, strictly in (0,1)
  double zeta;   // per-impression satiation rate, > 0
  double xi;     // advertiser log-match fixed effect
};

struct SiteParams {
  double eta;      // site log-match fixed effect
  double traffic;  // average daily impressions, > 0
};

// Tenure buckets: 0..4 map to themselves, then 5-6, 7-8, 9-12, 13-16,
// 17-32, 33-52, 53+ share fixed effects.
inline constexpr int kTenureBuckets = 12;

struct TimeEffects {
  std::vector<double> phi;  // exactly kTenureBuckets entries, indexed by tenure bucket
  std::vector<double> psi;  // one entry per calendar month covered by the data
};

// Cumulative impression/click counts: the sufficient statistic for learning.
struct BeliefState {
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;

  bool valid() const {
    return impressions >= 0 && clicks >= 0 && clicks <= impressions;
  }
  friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

struct SubscriptionOption {
  int days = 0;     // >= 1
  Cents price = 0;  // >= 0

  double price_dollars() const { return cents_to_dollars(price); }
  friend bool operator==(const SubscriptionOption&, const SubscriptionOption&) = default;
};

// A site-week menu of duration/price pairs. Validated on construction:
// strictly increasing in days and strictly increasing in price, so the
// likelihood bound formulas always see positive price gaps.
class Menu {
 public:
  Menu() = default;

  explicit Menu(std::vector<SubscriptionOption> options) : options_(std::move(options)) {
    for (std::size_t i = 0; i < options_.size(); ++i) {
      if (options_[i].days < 1) throw std::invalid_argument("Menu: option days must be >= 1");
      if (options_[i].price < 0) throw std::invalid_argument("Menu: option price must be >= 0");
      if (i > 0) {
        if (options_[i].days <= options_[i - 1].days)
          throw std::invalid_argument("Menu: days must be strictly increasing");
        if (options_[i].price <= options_[i - 1].price)
          throw std::invalid_argument("Menu: price must be strictly increasing in days");
      }
    }
  }

  std::span<const SubscriptionOption> options() const { return options_; }
  bool empty() const { return options_.empty(); }
  std::size_t size() const { return options_.size(); }
  const SubscriptionOption& operator[](std::size_t i) const { return options_[i]; }

  // Index of the option with the given duration, if offered.
  std::optional<std::size_t> find_days(int days) const {
    for (std::size_t i = 0; i < options_.size(); ++i)
      if (options_[i].days == days) return i;
    return std::nullopt;
  }

  friend bool operator==(const Menu&, const Menu&) = default;

 private:
  std::vector<SubscriptionOption> options_;
};

struct MatchContext {
  int tau = 0;           // tenure bucket, 0..11
  int month = 0;         // calendar month index
  double epsilon = 0.0;  // idiosyncratic demand shock
};

// Beta prior (alpha, beta) for the CTR belief with mean gamma. kappa is the
// prior concentration; the model normalizes it to one but the generalized
// form Beta(kappa, kappa(1-gamma)/gamma) is kept as a config override.
inline std::pair<double, double> prior_beta_params(double gamma, double kappa = 1.0) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::domain_error("prior_beta_params: gamma must be in (0,1)");
  if (!(kappa > 0.0)) throw std::domain_error("prior_beta_params: kappa must be > 0");
  return {kappa, kappa * (1.0 - gamma) / gamma};
}

// Posterior expected ratio of CTR to gamma: (kappa + n^C) / (kappa + gamma n^I).
// Equals 1 for an empty state; converges to c/gamma as counts grow.
inline double belief_ratio(const BeliefState& state, double gamma, double kappa = 1.0) {
  if (!state.valid()) throw std::domain_error("belief_ratio: invalid belief state");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::domain_error("belief_ratio: gamma must be in (0,1)");
  return (kappa + static_cast<double>(state.clicks)) /
         (kappa + gamma * static_cast<double>(state.impressions));
}

// Posterior mean CTR belief: gamma (kappa + n^C) / (kappa + gamma n^I).
inline double expected_ctr(const BeliefState& state, double gamma, double kappa = 1.0) {
  return gamma * belief_ratio(state, gamma, kappa);
}

// Counts are cumulative sums, so updating is commutative and associative
// across batches.
inline BeliefState update_beliefs(const BeliefState& state, std::int64_t new_impressions,
                                  std::int64_t new_clicks) {
  if (new_impressions < 0 || new_clicks < 0 || new_clicks > new_impressions)
    throw std::domain_error("update_beliefs: need 0 <= new_clicks <= new_impressions");
  return BeliefState{state.impressions + new_impressions, state.clicks + new_clicks};
}

// Bucket index for weeks since the first ad at a site. std::nullopt means the
// advertiser never advertised there, which lands in bucket 0 (the bucket of
// the first ad). Weeks 33-52 inclusive map to bucket 10, 53+ to bucket 11.
inline int tau_bucket(std::optional<std::int64_t> weeks_since_first_ad) {
  if (!weeks_since_first_ad.has_value()) return 0;
  const std::int64_t w = *weeks_since_first_ad;
  if (w < 0) throw std::domain_error("tau_bucket: weeks must be non-negative");
  if (w <= 4) return static_cast<int>(w);
  if (w <= 6) return 5;
  if (w <= 8) return 6;
  if (w <= 12) return 7;
  if (w <= 16) return 8;
  if (w <= 32) return 9;
  if (w <= 52) return 10;
  return 11;
}

// Deterministic part of expected match: ratio * exp(xi + eta + phi_tau + psi_m).
inline double deterministic_match(double ratio, double xi, double eta, double phi_tau,
                                  double psi_m) {
  return ratio * std::exp(xi + eta + phi_tau + psi_m);
}

// Expected payoff of running x days at a site with daily traffic t:
//   mu_check * exp(epsilon) * zeta^-1 * log(1 + t x zeta) - p.
// days == 0 is the outside option and pays exactly zero.
inline double expected_payoff(double mu_check, double epsilon, double zeta, double traffic,
                              int days, double price) {
  if (days == 0) return 0.0;
  return mu_check * std::exp(epsilon) * std::log1p(traffic * days * zeta) / zeta - price;
}

// Argmax of expected payoff over the outside option and the menu. Returns the
// chosen duration (0 = no purchase). Ties break toward the shorter duration.
inline int optimal_choice(const Menu& menu, double mu_check, double epsilon, double zeta,
                          double traffic) {
  int best_days = 0;
  double best_value = 0.0;
  const double scale = mu_check * std::exp(epsilon) / zeta;
  for (const auto& opt : menu.options()) {
    const double value = scale * std::log1p(traffic * opt.days * zeta) - opt.price_dollars();
    if (value > best_value) {
      best_value = value;
      best_days = opt.days;
    }
  }
  return best_days;
}

}  // namespace adlearn
