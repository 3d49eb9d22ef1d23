#include "adlearn/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace adlearn {

namespace {

constexpr std::uint64_t kEpsStream = 0x455053;    // shock draws
constexpr std::uint64_t kClickStream = 0x434c4b;  // click realization
constexpr std::uint64_t kMarketStream = 0x4d4b54; // market generation

struct EngineConfig {
  const MarketData* market = nullptr;
  const std::vector<std::vector<double>>* click_ctr = nullptr;
  std::vector<std::vector<BeliefState>> init_beliefs;
  std::vector<std::vector<char>> allowed;
  std::map<std::tuple<int, int, int>, EpsilonBounds> truncation;
  std::uint64_t master_seed = 1;
  int draw_index = 0;
};

std::int64_t draw_binomial(std::int64_t n, double p, KeyedRng& key_rng) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::mt19937_64 engine(key_rng.next_u64());
  std::binomial_distribution<std::int64_t> dist(n, p);
  return dist(engine);
}

SimOutcome run_engine(const ThetaDraw& theta, const EngineConfig& cfg) {
  const MarketData& market = *cfg.market;
  const int A = market.advertisers.size();
  const int S = market.sites.size();
  const int W = market.n_weeks;
  if (theta.n_advertisers() != A || theta.n_sites() != S)
    throw std::invalid_argument("run_engine: theta dimensions do not match the market");

  // Menu lookup table.
  std::vector<std::vector<const Menu*>> menu_at(S, std::vector<const Menu*>(W + 1, nullptr));
  for (const auto& [key, menu] : market.menus)
    if (key.second >= 1 && key.second <= W) menu_at[key.first][key.second] = &menu;

  SimOutcome out;
  out.spend_by_advertiser.assign(A, 0);
  out.revenue_by_site.assign(S, 0);
  out.final_beliefs = cfg.init_beliefs;

  std::vector<std::vector<int>> blocked_until(A, std::vector<int>(S, 0));
  std::vector<std::vector<int>> first_ad_week(A, std::vector<int>(S, 0));

  for (int w = 1; w <= W; ++w) {
    const int month = month_of_week(w);
    for (int a = 0; a < A; ++a) {
      if (market.join_week[a] > w) continue;
      for (int s = 0; s < S; ++s) {
        if (!cfg.allowed[a][s] || blocked_until[a][s] > w) continue;
        const Menu* menu = menu_at[s][w];
        if (!menu || menu->empty()) continue;

        const int tau = first_ad_week[a][s] > 0 ? tau_bucket(w - first_ad_week[a][s])
                                                : tau_bucket({});
        const double gamma_a = theta.gamma(a);
        const double ratio = belief_ratio(out.final_beliefs[a][s], gamma_a);
        const double mu = deterministic_match(ratio, theta.xi[a], theta.eta[s],
                                              theta.phi[tau], theta.psi[month]);

        KeyedRng eps_rng{cfg.master_seed, kEpsStream,
                         static_cast<std::uint64_t>(cfg.draw_index),
                         static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(s),
                         static_cast<std::uint64_t>(w)};
        double eps;
        const auto trunc = cfg.truncation.find({a, s, w});
        if (trunc != cfg.truncation.end() &&
            trunc->second.lower < trunc->second.upper) {
          eps = truncated_normal(trunc->second.lower, trunc->second.upper, theta.sigma,
                                 eps_rng);
        } else {
          // Non-rationalizable occasions under this draw fall back to the
          // unconditional shock.
          eps = theta.sigma * eps_rng.next_normal();
        }

        const int x = optimal_choice(*menu, mu, eps, theta.zeta[a], market.traffic[s]);
        if (x == 0) continue;

        const auto opt_idx = menu->find_days(x);
        const SubscriptionOption& opt = (*menu)[*opt_idx];
        const std::int64_t impressions = std::llround(market.traffic[s] * x);
        const double ctr = (*cfg.click_ctr)[a][s];
        if (!std::isfinite(ctr))
          throw std::runtime_error("run_engine: no click CTR for a purchased pair");
        KeyedRng click_rng{cfg.master_seed, kClickStream,
                           static_cast<std::uint64_t>(cfg.draw_index),
                           static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(s),
                           static_cast<std::uint64_t>(w)};
        const std::int64_t clicks = draw_binomial(impressions, ctr, click_rng);

        out.purchases.push_back({a, s, w, x, opt.price, eps, tau, month, impressions, clicks});
        out.spend_by_advertiser[a] += opt.price;
        out.revenue_by_site[s] += opt.price;
        out.final_beliefs[a][s] = update_beliefs(out.final_beliefs[a][s], impressions, clicks);
        blocked_until[a][s] = w + blocked_weeks(x);
        if (first_ad_week[a][s] == 0) first_ad_week[a][s] = w;
      }
    }
  }
  return out;
}

}  // namespace

Cents SimOutcome::total_spend() const {
  Cents total = 0;
  for (Cents c : spend_by_advertiser) total += c;
  return total;
}

Cents SimOutcome::total_revenue() const {
  Cents total = 0;
  for (Cents c : revenue_by_site) total += c;
  return total;
}

Regime regime_from_string(const std::string& name) {
  if (name == "B") return Regime::B;
  if (name == "C_F") return Regime::C_F;
  if (name == "C_P") return Regime::C_P;
  if (name == "C_FP" || name == "C_F+P") return Regime::C_FP;
  throw std::invalid_argument("unknown regime '" + name + "' (expected B, C_F, C_P, C_FP)");
}

std::string regime_to_string(Regime regime) {
  switch (regime) {
    case Regime::B: return "B";
    case Regime::C_F: return "C_F";
    case Regime::C_P: return "C_P";
    case Regime::C_FP: return "C_FP";
  }
  return "?";
}

double SimInputs::click_ctr(int a, int s) const {
  const double obs = ctr_observed[a][s];
  if (std::isfinite(obs)) return obs;
  return ctr_imputed.empty() ? kNaN : ctr_imputed[a][s];
}

SimInputs make_sim_inputs(const MarketData& market, std::uint64_t master_seed,
                          std::vector<std::vector<double>> ctr_imputed) {
  SimInputs inputs;
  inputs.market = &market;
  inputs.observed_choices = build_observations(market);
  inputs.ctr_observed = observed_ctr_table(market);
  inputs.ctr_imputed = std::move(ctr_imputed);
  inputs.history.assign(market.advertisers.size(),
                        std::vector<BeliefState>(market.sites.size()));
  inputs.master_seed = master_seed;
  return inputs;
}

BeliefState init_information_state(Regime regime, int advertiser, int site,
                                   const SimInputs& inputs) {
  const double observed = inputs.ctr_observed[advertiser][site];
  const double imputed =
      inputs.ctr_imputed.empty() ? kNaN : inputs.ctr_imputed[advertiser][site];
  switch (regime) {
    case Regime::B:
      return inputs.history[advertiser][site];
    case Regime::C_F:
      return std::isfinite(observed) ? oracle_belief(observed)
                                     : inputs.history[advertiser][site];
    case Regime::C_P:
      if (!std::isfinite(imputed))
        throw std::runtime_error("init_information_state: missing imputed CTR under C_P");
      return oracle_belief(imputed);
    case Regime::C_FP:
      if (std::isfinite(observed)) return oracle_belief(observed);
      if (!std::isfinite(imputed))
        throw std::runtime_error("init_information_state: missing imputed CTR under C_FP");
      return oracle_belief(imputed);
  }
  throw std::logic_error("init_information_state: unhandled regime");
}

SimOutcome run_scenario(const ThetaDraw& theta, const ScenarioSpec& scenario,
                        const SimInputs& inputs, int draw_index) {
  const MarketData& market = *inputs.market;
  const int A = market.advertisers.size();
  const int S = market.sites.size();

  EngineConfig cfg;
  cfg.market = &market;
  cfg.click_ctr = nullptr;
  cfg.master_seed = inputs.master_seed;
  cfg.draw_index = draw_index;

  const bool restricted = regime_restricted(scenario.regime);
  cfg.allowed.assign(A, std::vector<char>(S, 1));
  if (restricted)
    for (int a = 0; a < A; ++a)
      for (int s = 0; s < S; ++s)
        cfg.allowed[a][s] = std::isfinite(inputs.ctr_observed[a][s]) ? 1 : 0;

  cfg.init_beliefs.assign(A, std::vector<BeliefState>(S));
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s)
      if (cfg.allowed[a][s])
        cfg.init_beliefs[a][s] = init_information_state(scenario.regime, a, s, inputs);

  if (scenario.truncate_shocks) {
    for (const auto& obs : inputs.observed_choices) {
      const int a = obs.advertiser;
      const ThetaSlice slice{theta.gamma(a),       theta.zeta[a],
                             theta.xi[a],          theta.eta[obs.site],
                             theta.phi[obs.tau],   theta.psi[obs.month], 1.0};
      cfg.truncation[{a, obs.site, obs.week}] =
          compute_bounds(obs, slice, market.traffic[obs.site]);
    }
  }

  // Click realization: observed c_as where available, imputed elsewhere.
  std::vector<std::vector<double>> click(A, std::vector<double>(S, kNaN));
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s)
      if (cfg.allowed[a][s]) click[a][s] = inputs.click_ctr(a, s);
  cfg.click_ctr = &click;

  return run_engine(theta, cfg);
}

std::vector<double> true_welfare(const SimOutcome& outcome, const SimInputs& inputs,
                                 const ThetaDraw& theta,
                                 const std::map<std::tuple<int, int, int>, double>* phi_override) {
  std::vector<double> value(inputs.market->advertisers.size(), 0.0);
  for (const auto& p : outcome.purchases) {
    const double ctr = inputs.click_ctr(p.advertiser, p.site);
    if (!std::isfinite(ctr))
      throw std::runtime_error("true_welfare: no oracle CTR for a purchased pair");
    const double gamma_a = theta.gamma(p.advertiser);
    const double oracle_ratio = belief_ratio(oracle_belief(ctr), gamma_a);
    double phi = theta.phi[p.tau];
    if (phi_override) {
      const auto it = phi_override->find({p.advertiser, p.site, p.week});
      if (it != phi_override->end()) phi = it->second;
    }
    const double mu = deterministic_match(oracle_ratio, theta.xi[p.advertiser],
                                          theta.eta[p.site], phi, theta.psi[p.month]);
    value[p.advertiser] +=
        expected_payoff(mu, p.epsilon, theta.zeta[p.advertiser],
                        inputs.market->traffic[p.site], p.days, cents_to_dollars(p.price));
  }
  return value;
}

std::map<std::tuple<int, int, int>, double> phi_averaging_overrides(const SimOutcome& baseline,
                                                                    const SimOutcome& cf,
                                                                    const ThetaDraw& theta) {
  std::map<std::tuple<int, int, int>, int> base_tau;
  for (const auto& p : baseline.purchases) base_tau[{p.advertiser, p.site, p.week}] = p.tau;
  std::map<std::tuple<int, int, int>, double> overrides;
  for (const auto& p : cf.purchases) {
    const auto it = base_tau.find({p.advertiser, p.site, p.week});
    if (it != base_tau.end() && it->second != p.tau)
      overrides[it->first] = 0.5 * (theta.phi[it->second] + theta.phi[p.tau]);
  }
  return overrides;
}

PairedRun run_paired(const ThetaDraw& theta, const ScenarioSpec& scenario,
                     const SimInputs& inputs, int draw_index) {
  PairedRun pair;
  pair.draw = draw_index;
  const ScenarioSpec base_spec{Regime::B, scenario.truncate_shocks};
  pair.baseline = run_scenario(theta, base_spec, inputs, draw_index);
  pair.counterfactual = run_scenario(theta, scenario, inputs, draw_index);
  const auto overrides = phi_averaging_overrides(pair.baseline, pair.counterfactual, theta);
  pair.welfare_baseline = true_welfare(pair.baseline, inputs, theta, &overrides);
  pair.welfare_counterfactual = true_welfare(pair.counterfactual, inputs, theta, &overrides);
  return pair;
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw std::domain_error("median_of: empty");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

ComparisonRow summarize(const std::string& metric, const std::vector<double>& base,
                        const std::vector<double>& delta, int n_draws, KeyedRng& boot_rng,
                        int reps) {
  ComparisonRow row;
  row.metric = metric;
  row.n_units = static_cast<int>(delta.size());
  row.n_draws = n_draws;
  row.median_baseline = median_of(base);
  row.median_delta = median_of(delta);
  row.pct_change = row.median_baseline != 0.0
                       ? 100.0 * row.median_delta / std::fabs(row.median_baseline)
                       : kNaN;
  std::vector<double> medians(reps);
  std::vector<double> resample(delta.size());
  for (int r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < delta.size(); ++i)
      resample[i] = delta[boot_rng.next_below(delta.size())];
    medians[r] = median_of(resample);
  }
  std::sort(medians.begin(), medians.end());
  row.ci_lo = medians[static_cast<std::size_t>(0.025 * (reps - 1))];
  row.ci_hi = medians[static_cast<std::size_t>(0.975 * (reps - 1))];
  return row;
}

}  // namespace

ComparisonSummary compare_runs(const std::vector<PairedRun>& pairs, int n_advertisers,
                               int n_sites, std::uint64_t bootstrap_seed, int bootstrap_reps) {
  if (pairs.empty()) throw std::invalid_argument("compare_runs: need at least one pair");
  const double nd = static_cast<double>(pairs.size());

  ComparisonSummary out;
  out.advertiser_spend_base.assign(n_advertisers, 0.0);
  out.advertiser_spend_cf.assign(n_advertisers, 0.0);
  out.advertiser_value_base.assign(n_advertisers, 0.0);
  out.advertiser_value_cf.assign(n_advertisers, 0.0);
  out.publisher_revenue_base.assign(n_sites, 0.0);
  out.publisher_revenue_cf.assign(n_sites, 0.0);

  for (const auto& pair : pairs) {
    for (int a = 0; a < n_advertisers; ++a) {
      out.advertiser_spend_base[a] += cents_to_dollars(pair.baseline.spend_by_advertiser[a]) / nd;
      out.advertiser_spend_cf[a] +=
          cents_to_dollars(pair.counterfactual.spend_by_advertiser[a]) / nd;
      out.advertiser_value_base[a] += pair.welfare_baseline[a] / nd;
      out.advertiser_value_cf[a] += pair.welfare_counterfactual[a] / nd;
    }
    for (int s = 0; s < n_sites; ++s) {
      out.publisher_revenue_base[s] += cents_to_dollars(pair.baseline.revenue_by_site[s]) / nd;
      out.publisher_revenue_cf[s] +=
          cents_to_dollars(pair.counterfactual.revenue_by_site[s]) / nd;
    }
  }

  auto deltas = [](const std::vector<double>& cf, const std::vector<double>& base) {
    std::vector<double> d(cf.size());
    for (std::size_t i = 0; i < cf.size(); ++i) d[i] = cf[i] - base[i];
    return d;
  };

  KeyedRng boot{bootstrap_seed, 0x424f4f54ULL};
  out.rows.push_back(summarize("advertiser_spend", out.advertiser_spend_base,
                               deltas(out.advertiser_spend_cf, out.advertiser_spend_base),
                               static_cast<int>(pairs.size()), boot, bootstrap_reps));
  out.rows.push_back(summarize("advertiser_valuation", out.advertiser_value_base,
                               deltas(out.advertiser_value_cf, out.advertiser_value_base),
                               static_cast<int>(pairs.size()), boot, bootstrap_reps));
  out.rows.push_back(summarize("publisher_revenue", out.publisher_revenue_base,
                               deltas(out.publisher_revenue_cf, out.publisher_revenue_base),
                               static_cast<int>(pairs.size()), boot, bootstrap_reps));
  return out;
}

SyntheticMarket generate_synthetic_market(const MarketConfig& config) {
  if (config.advertisers < 1 || config.sites < 1 || config.weeks < 1 ||
      !(config.traffic_min > 0.0) || !(config.traffic_max >= config.traffic_min))
    throw std::invalid_argument("generate_synthetic_market: invalid config");

  SyntheticMarket market;
  MarketData& data = market.data;

  const int A = config.advertisers;
  const int S = config.sites;
  const int W = config.weeks;

  auto pad = [](int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
  };
  const int aw = static_cast<int>(std::to_string(A - 1).size());
  const int sw = static_cast<int>(std::to_string(S - 1).size());
  for (int a = 0; a < A; ++a) data.advertisers.intern("A" + pad(a, aw));
  for (int s = 0; s < S; ++s) data.sites.intern("S" + pad(s, sw));

  // Geometric traffic grid hitting both endpoints.
  data.traffic.resize(S);
  for (int s = 0; s < S; ++s) {
    const double frac = S > 1 ? static_cast<double>(s) / (S - 1) : 0.0;
    data.traffic[s] = std::exp(std::log(config.traffic_min) +
                               frac * (std::log(config.traffic_max) - std::log(config.traffic_min)));
  }
  data.n_weeks = W;
  data.n_months = month_of_week(W) + 1;
  data.join_week.assign(A, 1);

  const ParamLayout layout = data.layout();
  KeyedRng rng{config.seed, kMarketStream};

  market.theta_true = sample_prior(layout, rng);
  if (config.fixed_sigma > 0.0) market.theta_true.sigma = config.fixed_sigma;
  if (config.fixed_zeta > 0.0)
    for (auto& z : market.theta_true.zeta) z = config.fixed_zeta;
  if (config.fixed_effect_sd >= 0.0) {
    for (auto& v : market.theta_true.xi) v = config.fixed_effect_sd * rng.next_normal();
    for (auto& v : market.theta_true.eta) v = config.fixed_effect_sd * rng.next_normal();
    for (auto& v : market.theta_true.phi) v = config.fixed_effect_sd * rng.next_normal();
    for (auto& v : market.theta_true.psi) v = config.fixed_effect_sd * rng.next_normal();
  }
  if (config.gamma_multiplier > 0.0) {
    // Pin gamma_a by back-solving the latent g_a at the current gamma_bar.
    const double gamma = std::min(0.999, config.gamma_multiplier * config.ctr_median);
    for (int a = 0; a < A; ++a)
      market.theta_true.g[a] = gamma / (1.0 - gamma) / market.theta_true.gamma_bar;
  }

  // True CTR matrix.
  market.ctr_true.assign(A, std::vector<double>(S));
  std::vector<int> topic_of(A, 0);
  if (config.latent_topics > 0) {
    const int K = config.latent_topics;
    for (int a = 0; a < A; ++a)
      topic_of[a] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(K)));
    // Site-by-topic log affinities; advertisers sharing a topic share CTRs
    // up to a small idiosyncratic wiggle.
    std::vector<std::vector<double>> affinity(S, std::vector<double>(K));
    for (int s = 0; s < S; ++s)
      for (int k = 0; k < K; ++k) affinity[s][k] = config.ctr_log_sd * rng.next_normal();
    for (int a = 0; a < A; ++a)
      for (int s = 0; s < S; ++s) {
        const double noise = 0.1 * config.ctr_log_sd * rng.next_normal();
        market.ctr_true[a][s] =
            std::clamp(config.ctr_median * std::exp(affinity[s][topic_of[a]] + noise), 1e-8, 0.5);
      }
    // Tags: a handful of images per advertiser, tags drawn from the topic's
    // vocabulary plus a shared common pool.
    for (int a = 0; a < A; ++a) {
      const int images = 2 + static_cast<int>(rng.next_below(3));
      for (int img = 0; img < images; ++img) {
        const std::string image_id =
            data.advertisers.name(a) + "_img" + std::to_string(img);
        for (int tag = 0; tag < 10; ++tag) {
          const bool common = rng.next_u01() < 0.2;
          const std::string name =
              common ? "common" + std::to_string(rng.next_below(5))
                     : "topic" + std::to_string(topic_of[a]) + "_" +
                           std::to_string(rng.next_below(15));
          market.tags.push_back({a, image_id, name});
        }
      }
    }
  } else {
    for (int a = 0; a < A; ++a)
      for (int s = 0; s < S; ++s)
        market.ctr_true[a][s] = std::clamp(
            config.ctr_median * std::exp(config.ctr_log_sd * rng.next_normal()), 1e-8, 0.5);
  }

  // Menus: log-linear prices anchored at the 7-day price for the reference
  // traffic, strictly increasing in duration by construction.
  std::vector<double> week_effect(W + 1, 0.0);
  for (int w = 1; w <= W; ++w) week_effect[w] = config.week_effect_sd * rng.next_normal();
  for (int s = 0; s < S; ++s) {
    const double mu_site = std::log(config.price_base_7day * data.traffic[s] /
                                    config.reference_traffic) -
                           config.price_elasticity * std::log(7.0);
    for (int w = 1; w <= W; ++w) {
      std::vector<SubscriptionOption> options;
      Cents prev = -1;
      for (int days : config.menu_days) {
        double log_price = mu_site + week_effect[w] +
                           config.price_elasticity * std::log(static_cast<double>(days));
        if (config.price_noise_sd > 0.0)
          log_price += config.price_noise_sd * rng.next_normal();
        Cents price = dollars_to_cents(std::exp(log_price));
        if (price <= prev) price = prev + 1;  // keep the menu strictly increasing
        options.push_back({days, price});
        prev = price;
      }
      data.menus.emplace(std::make_pair(s, w), Menu(options));
    }
  }

  // Forward-simulate the observed transactions under the true parameters.
  EngineConfig cfg;
  cfg.market = &data;
  cfg.click_ctr = &market.ctr_true;
  cfg.init_beliefs.assign(A, std::vector<BeliefState>(S));
  cfg.allowed.assign(A, std::vector<char>(S, 1));
  cfg.master_seed = config.seed;
  cfg.draw_index = 0;
  const SimOutcome outcome = run_engine(market.theta_true, cfg);
  for (const auto& p : outcome.purchases)
    data.transactions.push_back(
        {p.advertiser, p.site, p.week, p.days, p.price, p.impressions, p.clicks});
  return market;
}

}  // namespace adlearn
