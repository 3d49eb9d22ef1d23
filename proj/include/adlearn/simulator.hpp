#pragma once

// Synthetic market generation and the counterfactual engine: paired
// baseline/counterfactual runs over posterior draws with shared,
// key-addressed shock streams, binomial click realization, schedule
// advancement and oracle welfare accounting.

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "adlearn/dataset.hpp"
#include "adlearn/inference.hpp"
#include "adlearn/likelihood.hpp"
#include "adlearn/model.hpp"
#include "adlearn/theta.hpp"

namespace adlearn {

struct MarketConfig {
  int advertisers = 100;
  int sites = 20;
  int weeks = 27;
  double traffic_min = 20000.0;   // least-traffic site, daily impressions
  double traffic_max = 420000.0;  // most-traffic site

  // True parameters are drawn from the hierarchical priors unless overridden.
  double fixed_sigma = -1.0;        // > 0 pins sigma
  double fixed_zeta = -1.0;         // > 0 pins every zeta_a
  double gamma_multiplier = -1.0;   // > 0 pins gamma_a = multiplier * ctr_median
  double fixed_effect_sd = -1.0;    // >= 0 replaces the t4 fixed effects with N(0, sd^2)

  // True CTR matrix: log-normal around ctr_median; optional latent tag
  // structure shared by similar advertisers (used by the pooling pipeline).
  double ctr_median = 0.00045;
  double ctr_log_sd = 0.8;
  int latent_topics = 0;  // > 0 switches to topic-driven CTRs and tag emission

  // Menus: durations with a 7-day anchor price at the reference traffic,
  // log-linear in duration, small week effects, optional log-normal noise.
  std::vector<int> menu_days = {7, 14, 30};
  double price_base_7day = 800.0;
  double reference_traffic = 117286.0;  // 821K weekly impressions / 7
  double price_elasticity = 0.85;
  double week_effect_sd = 0.05;
  double price_noise_sd = 0.0;

  std::uint64_t seed = 1;
};

struct TagRecord {
  int advertiser;
  std::string image_id;
  std::string tag;
};

struct SyntheticMarket {
  MarketData data;               // transactions, sites, menus, join weeks
  ThetaDraw theta_true;
  std::vector<std::vector<double>> ctr_true;  // advertiser x site
  std::vector<TagRecord> tags;   // empty unless latent_topics > 0
};

SyntheticMarket generate_synthetic_market(const MarketConfig& config);

enum class Regime { B, C_F, C_P, C_FP };

Regime regime_from_string(const std::string& name);
std::string regime_to_string(Regime regime);

// Restricted regimes choose only among observed advertiser-site pairs.
inline bool regime_restricted(Regime r) { return r == Regime::B || r == Regime::C_F; }

struct ScenarioSpec {
  Regime regime = Regime::B;
  bool truncate_shocks = true;  // truncate at observed choice occasions (all regimes)
};

// Immutable inputs shared by every run of a counterfactual experiment.
struct SimInputs {
  const MarketData* market = nullptr;
  std::vector<ChoiceObservation> observed_choices;     // from build_observations
  std::vector<std::vector<double>> ctr_observed;       // pooled c_as, NaN if unobserved
  std::vector<std::vector<double>> ctr_imputed;        // pooled prediction, NaN if missing
  std::vector<std::vector<BeliefState>> history;       // pre-window counts, usually zero
  std::uint64_t master_seed = 1;

  // Click CTR used for realization: observed where available, else imputed.
  double click_ctr(int a, int s) const;
};

SimInputs make_sim_inputs(const MarketData& market, std::uint64_t master_seed,
                          std::vector<std::vector<double>> ctr_imputed = {});

// Initial belief state for one advertiser-site pair under a regime.
BeliefState init_information_state(Regime regime, int advertiser, int site,
                                   const SimInputs& inputs);

inline constexpr std::int64_t kOracleImpressions = 1000000000000LL;  // 10^12

inline BeliefState oracle_belief(double ctr) {
  return BeliefState{kOracleImpressions,
                     static_cast<std::int64_t>(std::floor(1e12 * ctr))};
}

struct Purchase {
  int advertiser, site, week, days;
  Cents price;
  double epsilon;
  int tau, month;
  std::int64_t impressions, clicks;
};

struct SimOutcome {
  std::vector<Purchase> purchases;  // chronological
  std::vector<Cents> spend_by_advertiser;
  std::vector<Cents> revenue_by_site;
  std::vector<std::vector<BeliefState>> final_beliefs;  // includes endowed counts

  Cents total_spend() const;
  Cents total_revenue() const;
};

// One week-by-week run under a posterior draw. Shocks are keyed by
// (master seed, draw, advertiser, site, week) so paired runs share them.
SimOutcome run_scenario(const ThetaDraw& theta, const ScenarioSpec& scenario,
                        const SimInputs& inputs, int draw_index);

// Oracle ("true") welfare per advertiser: each purchase revalued with the
// oracle belief ratio for the realized CTR source, net of prices.
// phi_override replaces phi at specific (a,s,w) purchases (tenure averaging).
std::vector<double> true_welfare(
    const SimOutcome& outcome, const SimInputs& inputs, const ThetaDraw& theta,
    const std::map<std::tuple<int, int, int>, double>* phi_override = nullptr);

// For (a,s,w) purchased in both runs with different tenure buckets, both
// welfare computations use the simple average of the two phi values.
std::map<std::tuple<int, int, int>, double> phi_averaging_overrides(const SimOutcome& baseline,
                                                                    const SimOutcome& cf,
                                                                    const ThetaDraw& theta);

struct PairedRun {
  int draw = 0;
  SimOutcome baseline;
  SimOutcome counterfactual;
  std::vector<double> welfare_baseline;        // per advertiser, phi-averaged
  std::vector<double> welfare_counterfactual;
};

PairedRun run_paired(const ThetaDraw& theta, const ScenarioSpec& scenario,
                     const SimInputs& inputs, int draw_index);

struct ComparisonRow {
  std::string metric;  // advertiser_spend, advertiser_valuation, publisher_revenue
  double median_baseline = 0.0;
  double median_delta = 0.0;
  double pct_change = 0.0;
  double ci_lo = 0.0;  // bootstrap 95% CI for the median delta, over units
  double ci_hi = 0.0;
  int n_units = 0;
  int n_draws = 0;
};

struct ComparisonSummary {
  std::vector<ComparisonRow> rows;
  // Posterior-mean levels per unit (averaged over draws).
  std::vector<double> advertiser_spend_base, advertiser_spend_cf;
  std::vector<double> advertiser_value_base, advertiser_value_cf;
  std::vector<double> publisher_revenue_base, publisher_revenue_cf;
};

ComparisonSummary compare_runs(const std::vector<PairedRun>& pairs, int n_advertisers,
                               int n_sites, std::uint64_t bootstrap_seed = 17,
                               int bootstrap_reps = 2000);

double median_of(std::vector<double> values);

}  // namespace adlearn
