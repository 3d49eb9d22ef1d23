// Command-line entry points: validate, simulate-market, estimate,
// counterfactual, pool-ctr, analyze. One JSON config file per run; every
// output CSV carries a provenance line (command, config digest, seed).
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "adlearn/analytics.hpp"
#include "adlearn/csv.hpp"
#include "adlearn/dataset.hpp"
#include "adlearn/hmc.hpp"
#include "adlearn/inference.hpp"
#include "adlearn/likelihood.hpp"
#include "adlearn/pooling.hpp"
#include "adlearn/pricing.hpp"
#include "adlearn/simulator.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace adlearn {

namespace {

struct AppConfig {
  std::string config_path;
  std::string digest;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 0;

  // paths
  std::string transactions, sites, menus, tags, draws, ctr_predictions;

  MarketConfig market;

  struct Sampler {
    int chains = 4;
    int warmup = 1000;
    int samples = 1000;
    double target_accept = 0.8;
    int max_leapfrog = 32;
    double kappa = 1.0;
    bool deduplicate = true;
    bool init_from_map = true;
  } sampler;

  struct Scenario {
    std::string regime = "C_P";
    int draws = 100;
    bool truncate_shocks = true;
    int bootstrap_reps = 2000;
  } scenario;

  struct Pooling {
    int bins = 20;
  } pooling;
};

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  AppConfig cfg;
  cfg.config_path = path;
  cfg.digest = hex16(fnv1a64(text));
  const json j = json::parse(text);

  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.threads = j.value("threads", cfg.threads);

  if (j.contains("paths")) {
    const json& p = j["paths"];
    cfg.transactions = p.value("transactions", "");
    cfg.sites = p.value("sites", "");
    cfg.menus = p.value("menus", "");
    cfg.tags = p.value("tags", "");
    cfg.draws = p.value("draws", "");
    cfg.ctr_predictions = p.value("ctr_predictions", "");
  }
  if (j.contains("market")) {
    const json& m = j["market"];
    cfg.market.advertisers = m.value("advertisers", cfg.market.advertisers);
    cfg.market.sites = m.value("sites", cfg.market.sites);
    cfg.market.weeks = m.value("weeks", cfg.market.weeks);
    cfg.market.traffic_min = m.value("traffic_min", cfg.market.traffic_min);
    cfg.market.traffic_max = m.value("traffic_max", cfg.market.traffic_max);
    cfg.market.fixed_sigma = m.value("fixed_sigma", cfg.market.fixed_sigma);
    cfg.market.fixed_zeta = m.value("fixed_zeta", cfg.market.fixed_zeta);
    cfg.market.gamma_multiplier = m.value("gamma_multiplier", cfg.market.gamma_multiplier);
    cfg.market.fixed_effect_sd = m.value("fixed_effect_sd", cfg.market.fixed_effect_sd);
    cfg.market.ctr_median = m.value("ctr_median", cfg.market.ctr_median);
    cfg.market.ctr_log_sd = m.value("ctr_log_sd", cfg.market.ctr_log_sd);
    cfg.market.latent_topics = m.value("latent_topics", cfg.market.latent_topics);
    if (m.contains("menu_days"))
      cfg.market.menu_days = m["menu_days"].get<std::vector<int>>();
    cfg.market.price_base_7day = m.value("price_base_7day", cfg.market.price_base_7day);
    cfg.market.reference_traffic = m.value("reference_traffic", cfg.market.reference_traffic);
    cfg.market.price_elasticity = m.value("price_elasticity", cfg.market.price_elasticity);
    cfg.market.week_effect_sd = m.value("week_effect_sd", cfg.market.week_effect_sd);
    cfg.market.price_noise_sd = m.value("price_noise_sd", cfg.market.price_noise_sd);
  }
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    cfg.sampler.chains = s.value("chains", cfg.sampler.chains);
    cfg.sampler.warmup = s.value("warmup", cfg.sampler.warmup);
    cfg.sampler.samples = s.value("samples", cfg.sampler.samples);
    cfg.sampler.target_accept = s.value("target_accept", cfg.sampler.target_accept);
    cfg.sampler.max_leapfrog = s.value("max_leapfrog", cfg.sampler.max_leapfrog);
    cfg.sampler.kappa = s.value("kappa", cfg.sampler.kappa);
    cfg.sampler.deduplicate = s.value("deduplicate", cfg.sampler.deduplicate);
    cfg.sampler.init_from_map = s.value("init_from_map", cfg.sampler.init_from_map);
  }
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    cfg.scenario.regime = s.value("regime", cfg.scenario.regime);
    cfg.scenario.draws = s.value("draws", cfg.scenario.draws);
    cfg.scenario.truncate_shocks = s.value("truncate_shocks", cfg.scenario.truncate_shocks);
    cfg.scenario.bootstrap_reps = s.value("bootstrap_reps", cfg.scenario.bootstrap_reps);
  }
  if (j.contains("pooling")) {
    cfg.pooling.bins = j["pooling"].value("bins", cfg.pooling.bins);
  }
  cfg.market.seed = cfg.seed;
  return cfg;
}

std::vector<std::string> provenance(const AppConfig& cfg, const std::string& command) {
  return {"adlearn " + command + " config_digest=" + cfg.digest +
          " seed=" + std::to_string(cfg.seed)};
}

std::string out_path(const AppConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

MarketData load_market_from_config(const AppConfig& cfg, ValidationReport* report = nullptr) {
  if (cfg.transactions.empty() || cfg.sites.empty())
    throw std::runtime_error("config must set paths.transactions and paths.sites");
  return load_market(cfg.transactions, cfg.sites, cfg.menus, report);
}

int cmd_validate(const AppConfig& cfg) {
  ValidationReport report;
  const MarketData market = load_market_from_config(cfg, &report);
  const ValidationReport consistency = validate_market(market);
  report.violations.insert(report.violations.end(), consistency.violations.begin(),
                           consistency.violations.end());
  if (!cfg.tags.empty()) {
    const CsvTable tags = read_csv(cfg.tags);
    const std::size_t c_tag = tags.col("tag");
    (void)tags.col("advertiser_id");
    (void)tags.col("image_id");
    for (std::size_t r = 0; r < tags.rows.size(); ++r)
      if (tags.cell(r, c_tag).empty())
        report.violations.push_back(cfg.tags + " row " + std::to_string(r + 1) +
                                    ": empty tag");
  }
  if (!report.ok()) {
    for (const auto& v : report.violations) std::cerr << "violation: " << v << "\n";
    std::cerr << report.violations.size() << " violation(s)\n";
    return 1;
  }
  std::cout << "all inputs valid\n";
  return 0;
}

void write_theta_csv(const std::string& path, const ParamLayout& layout, const ThetaDraw& theta,
                     const std::vector<std::string>& comments) {
  CsvWriter out(path, {"parameter", "value"}, comments);
  const auto names = layout.column_names(true);
  const auto u = theta_to_unconstrained(layout, theta);
  const ThetaDraw t = theta;  // constrained values in column order
  std::vector<double> values;
  values.reserve(names.size());
  for (int a = 0; a < layout.advertisers; ++a) values.push_back(t.g[a]);
  for (int a = 0; a < layout.advertisers; ++a) values.push_back(t.zeta[a]);
  for (int a = 0; a < layout.advertisers; ++a) values.push_back(t.xi[a]);
  for (int s = 0; s < layout.sites; ++s) values.push_back(t.eta[s]);
  for (int k = 0; k < kTenureBuckets; ++k) values.push_back(t.phi[k]);
  for (int m = 0; m < layout.months; ++m) values.push_back(t.psi[m]);
  values.push_back(t.sigma);
  values.push_back(t.zeta_bar);
  values.push_back(t.gamma_bar);
  for (int a = 0; a < layout.advertisers; ++a) values.push_back(t.gamma(a));
  for (std::size_t i = 0; i < names.size(); ++i)
    out.write_row({names[i], format_double(values[i])});
  out.close();
}

int cmd_simulate_market(const AppConfig& cfg) {
  const SyntheticMarket market = generate_synthetic_market(cfg.market);
  const auto comments = provenance(cfg, "simulate-market");
  write_transactions_csv(out_path(cfg, "transactions.csv"), market.data, comments);
  write_sites_csv(out_path(cfg, "sites.csv"), market.data, comments);
  write_menus_csv(out_path(cfg, "menus.csv"), market.data, comments);
  write_theta_csv(out_path(cfg, "true_params.csv"), market.data.layout(), market.theta_true,
                  comments);
  {
    CsvWriter out(out_path(cfg, "true_ctr.csv"), {"advertiser_id", "site_id", "ctr"},
                  comments);
    for (int a = 0; a < market.data.advertisers.size(); ++a)
      for (int s = 0; s < market.data.sites.size(); ++s)
        out.write_row({market.data.advertisers.name(a), market.data.sites.name(s),
                       format_double(market.ctr_true[a][s])});
    out.close();
  }
  if (!market.tags.empty()) {
    CsvWriter out(out_path(cfg, "tags.csv"), {"advertiser_id", "image_id", "tag"}, comments);
    for (const auto& tag : market.tags)
      out.write_row({market.data.advertisers.name(tag.advertiser), tag.image_id, tag.tag});
    out.close();
  }
  std::cout << "simulated " << market.data.transactions.size() << " transactions over "
            << market.data.n_weeks << " weeks\n";
  return 0;
}

void write_draws_csv(const std::string& path, const ParamLayout& layout,
                     const std::vector<std::vector<std::vector<double>>>& chains,
                     const std::vector<std::string>& comments) {
  std::vector<std::string> columns = {"chain", "draw"};
  const auto names = layout.column_names(true);
  columns.insert(columns.end(), names.begin(), names.end());
  std::vector<std::string> all_comments = comments;
  all_comments.push_back("layout advertisers=" + std::to_string(layout.advertisers) +
                         " sites=" + std::to_string(layout.sites) +
                         " months=" + std::to_string(layout.months));
  CsvWriter out(path, columns, all_comments);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t d = 0; d < chains[c].size(); ++d) {
      const ThetaDraw theta = theta_from_unconstrained(layout, chains[c][d]);
      std::vector<std::string> row = {std::to_string(c), std::to_string(d)};
      for (int a = 0; a < layout.advertisers; ++a) row.push_back(format_double(theta.g[a]));
      for (int a = 0; a < layout.advertisers; ++a) row.push_back(format_double(theta.zeta[a]));
      for (int a = 0; a < layout.advertisers; ++a) row.push_back(format_double(theta.xi[a]));
      for (int s = 0; s < layout.sites; ++s) row.push_back(format_double(theta.eta[s]));
      for (int k = 0; k < kTenureBuckets; ++k) row.push_back(format_double(theta.phi[k]));
      for (int m = 0; m < layout.months; ++m) row.push_back(format_double(theta.psi[m]));
      row.push_back(format_double(theta.sigma));
      row.push_back(format_double(theta.zeta_bar));
      row.push_back(format_double(theta.gamma_bar));
      for (int a = 0; a < layout.advertisers; ++a)
        row.push_back(format_double(theta.gamma(a)));
      out.write_row(row);
    }
  }
  out.close();
}

std::vector<ThetaDraw> read_draws_csv(const std::string& path, const ParamLayout& layout) {
  const CsvTable table = read_csv(path);
  const auto names = layout.column_names(false);
  std::vector<std::size_t> cols;
  cols.reserve(names.size());
  for (const auto& name : names) cols.push_back(table.col(name));
  std::vector<ThetaDraw> draws;
  draws.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<double> u_constrained;
    u_constrained.reserve(names.size());
    for (const std::size_t c : cols)
      u_constrained.push_back(parse_double(table.cell(r, c), path));
    ThetaDraw theta;
    int i = 0;
    theta.g.resize(layout.advertisers);
    theta.zeta.resize(layout.advertisers);
    theta.xi.resize(layout.advertisers);
    theta.eta.resize(layout.sites);
    theta.phi.resize(kTenureBuckets);
    theta.psi.resize(layout.months);
    for (int a = 0; a < layout.advertisers; ++a) theta.g[a] = u_constrained[i++];
    for (int a = 0; a < layout.advertisers; ++a) theta.zeta[a] = u_constrained[i++];
    for (int a = 0; a < layout.advertisers; ++a) theta.xi[a] = u_constrained[i++];
    for (int s = 0; s < layout.sites; ++s) theta.eta[s] = u_constrained[i++];
    for (int k = 0; k < kTenureBuckets; ++k) theta.phi[k] = u_constrained[i++];
    for (int m = 0; m < layout.months; ++m) theta.psi[m] = u_constrained[i++];
    theta.sigma = u_constrained[i++];
    theta.zeta_bar = u_constrained[i++];
    theta.gamma_bar = u_constrained[i++];
    draws.push_back(std::move(theta));
  }
  return draws;
}

int cmd_estimate(const AppConfig& cfg) {
  MarketData market = load_market_from_config(cfg);
  const auto consistency = validate_market(market);
  if (!consistency.ok()) {
    for (const auto& v : consistency.violations) std::cerr << "violation: " << v << "\n";
    return 1;
  }
  if (market.menus.empty()) impute_menus_from_transactions(market);
  const ParamLayout layout = market.layout();
  const auto observations = build_observations(market);
  std::cout << "estimating on " << observations.size() << " choice occasions, "
            << layout.dim() << " parameters\n";

  const PreparedData data(observations, market.traffic, layout, cfg.sampler.kappa,
                          cfg.sampler.deduplicate);
  const Posterior posterior(&data);

  std::vector<FloorDiag> diags(cfg.sampler.chains + 1);
  SamplerConfig sampler_config;
  sampler_config.chains = cfg.sampler.chains;
  sampler_config.warmup = cfg.sampler.warmup;
  sampler_config.samples = cfg.sampler.samples;
  sampler_config.target_accept = cfg.sampler.target_accept;
  sampler_config.max_leapfrog = cfg.sampler.max_leapfrog;
  sampler_config.seed = cfg.seed;
  sampler_config.threads = cfg.threads;

  // Chain inits: prior draws, optionally sharpened by a short MAP run.
  std::vector<double> map_point;
  if (cfg.sampler.init_from_map) {
    KeyedRng rng{cfg.seed, 0x4d4150ULL};
    const ThetaDraw start = sample_prior(layout, rng);
    LogDensityGrad target = [&](std::span<const double> x, std::span<double> g) {
      return posterior.value_and_grad(x, g, &diags[cfg.sampler.chains]);
    };
    const MapResult map = map_estimate(target, theta_to_unconstrained(layout, start),
                                       {.max_iterations = 400});
    map_point = map.x;
    std::cout << "map init: logp " << map.value << " after " << map.iterations
              << " iterations\n";
  }
  for (int c = 0; c < cfg.sampler.chains; ++c) {
    KeyedRng rng{cfg.seed, 0x494e4954ULL, static_cast<std::uint64_t>(c)};
    std::vector<double> init;
    if (!map_point.empty()) {
      init = map_point;
      for (auto& v : init) v += 0.1 * rng.next_normal();
    } else {
      init = theta_to_unconstrained(layout, sample_prior(layout, rng));
    }
    sampler_config.inits.push_back(std::move(init));
  }

  std::vector<LogDensityGrad> chain_targets;
  chain_targets.reserve(cfg.sampler.chains);
  // One diagnostic accumulator per chain avoids cross-thread contention.
  std::atomic<int> next_chain{0};
  (void)next_chain;
  LogDensityGrad target = [&](std::span<const double> x, std::span<double> g) {
    return posterior.value_and_grad(x, g, nullptr);
  };
  const HmcResult result = hmc_sample(target, layout.dim(), sampler_config);

  const auto comments = provenance(cfg, "estimate");
  write_draws_csv(out_path(cfg, "draws.csv"), layout, result.chains, comments);

  const ChainDiagnostics diag = diagnostics(result.chains);
  long long floor_hits = 0;
  for (const auto& d : diags) floor_hits += d.hits;
  {
    CsvWriter out(out_path(cfg, "diagnostics.csv"), {"metric", "parameter", "value"},
                  comments);
    const auto names = layout.column_names(false);
    for (std::size_t i = 0; i < names.size(); ++i) {
      out.write_row({"split_rhat", names[i], format_double(diag.split_rhat[i])});
      out.write_row({"ess_bulk", names[i], format_double(diag.ess_bulk[i])});
      out.write_row({"ess_tail", names[i], format_double(diag.ess_tail[i])});
    }
    out.write_row({"divergences", "_total", std::to_string(result.divergences)});
    out.write_row({"floor_hits", "_map_phase", std::to_string(floor_hits)});
    for (std::size_t c = 0; c < result.accept_rate.size(); ++c)
      out.write_row({"accept_rate", "chain" + std::to_string(c),
                     format_double(result.accept_rate[c])});
    out.close();
  }

  // Pointwise log-likelihood export over all draws (original observation
  // order, one row per draw x observation).
  const PreparedData full(observations, market.traffic, layout, cfg.sampler.kappa, false);
  std::vector<std::vector<double>> matrix;
  for (const auto& chain : result.chains)
    for (const auto& u : chain)
      matrix.push_back(full.pointwise(theta_from_unconstrained(layout, u)));
  write_pointwise_loglik_csv(out_path(cfg, "pointwise_loglik.csv"), matrix, comments);

  double max_rhat = 0.0;
  for (double r : diag.split_rhat)
    if (std::isfinite(r)) max_rhat = std::max(max_rhat, r);
  std::cout << "draws written; max split R-hat " << max_rhat << ", divergences "
            << result.divergences << "\n";
  return 0;
}

std::vector<std::vector<double>> read_ctr_predictions(const std::string& path,
                                                      const MarketData& market) {
  const CsvTable table = read_csv(path);
  const std::size_t c_a = table.col("advertiser_id");
  const std::size_t c_s = table.col("site_id");
  const std::size_t c_ctr = table.col("ctr_pred");
  std::vector<std::vector<double>> pred(market.advertisers.size(),
                                        std::vector<double>(market.sites.size(), kNaN));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto a = market.advertisers.find(table.cell(r, c_a));
    const auto s = market.sites.find(table.cell(r, c_s));
    if (!a || !s) continue;  // predictions may cover a wider universe
    const std::string& cell = table.cell(r, c_ctr);
    if (!cell.empty()) pred[*a][*s] = parse_double(cell, path);
  }
  return pred;
}

int cmd_counterfactual(const AppConfig& cfg) {
  MarketData market = load_market_from_config(cfg);
  if (market.menus.empty()) impute_menus_from_transactions(market);
  const ParamLayout layout = market.layout();
  if (cfg.draws.empty()) throw std::runtime_error("config must set paths.draws");
  const auto all_draws = read_draws_csv(cfg.draws, layout);
  if (all_draws.empty()) throw std::runtime_error("no posterior draws in " + cfg.draws);

  std::vector<std::vector<double>> imputed;
  if (!cfg.ctr_predictions.empty())
    imputed = read_ctr_predictions(cfg.ctr_predictions, market);
  SimInputs inputs = make_sim_inputs(market, cfg.seed, std::move(imputed));

  ScenarioSpec scenario;
  scenario.regime = regime_from_string(cfg.scenario.regime);
  scenario.truncate_shocks = cfg.scenario.truncate_shocks;

  // Evenly thinned draws.
  const int n = std::min<int>(cfg.scenario.draws, static_cast<int>(all_draws.size()));
  std::vector<PairedRun> pairs;
  pairs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::size_t index = all_draws.size() * i / n;
    pairs.push_back(run_paired(all_draws[index], scenario, inputs, i));
  }
  const ComparisonSummary summary =
      compare_runs(pairs, market.advertisers.size(), market.sites.size(), cfg.seed,
                   cfg.scenario.bootstrap_reps);

  const auto comments = provenance(cfg, "counterfactual");
  {
    CsvWriter out(out_path(cfg, "advertiser_outcomes.csv"),
                  {"advertiser_id", "baseline_spend", "cf_spend", "delta_spend",
                   "baseline_value", "cf_value", "delta_value"},
                  comments);
    for (int a = 0; a < market.advertisers.size(); ++a)
      out.write_row({market.advertisers.name(a),
                     format_double(summary.advertiser_spend_base[a]),
                     format_double(summary.advertiser_spend_cf[a]),
                     format_double(summary.advertiser_spend_cf[a] -
                                   summary.advertiser_spend_base[a]),
                     format_double(summary.advertiser_value_base[a]),
                     format_double(summary.advertiser_value_cf[a]),
                     format_double(summary.advertiser_value_cf[a] -
                                   summary.advertiser_value_base[a])});
    out.close();
  }
  {
    CsvWriter out(out_path(cfg, "publisher_outcomes.csv"),
                  {"site_id", "baseline_revenue", "cf_revenue", "delta_revenue"}, comments);
    for (int s = 0; s < market.sites.size(); ++s)
      out.write_row({market.sites.name(s), format_double(summary.publisher_revenue_base[s]),
                     format_double(summary.publisher_revenue_cf[s]),
                     format_double(summary.publisher_revenue_cf[s] -
                                   summary.publisher_revenue_base[s])});
    out.close();
  }
  {
    CsvWriter out(out_path(cfg, "paired_summary.csv"),
                  {"metric", "median_baseline", "median_delta", "pct_change", "ci_lo",
                   "ci_hi", "n_units", "n_draws"},
                  comments);
    for (const auto& row : summary.rows)
      out.write_row({row.metric, format_double(row.median_baseline),
                     format_double(row.median_delta), format_double(row.pct_change),
                     format_double(row.ci_lo), format_double(row.ci_hi),
                     std::to_string(row.n_units), std::to_string(row.n_draws)});
    out.close();
  }
  for (const auto& row : summary.rows)
    std::cout << regime_to_string(scenario.regime) << " vs B " << row.metric << ": median delta "
              << row.median_delta << " (" << row.pct_change << "%), 95% CI [" << row.ci_lo
              << ", " << row.ci_hi << "]\n";
  return 0;
}

int cmd_pool_ctr(const AppConfig& cfg) {
  const MarketData market = load_market_from_config(cfg);
  if (cfg.tags.empty()) throw std::runtime_error("config must set paths.tags");
  const CsvTable tag_table = read_csv(cfg.tags);
  const std::size_t c_a = tag_table.col("advertiser_id");
  const std::size_t c_tag = tag_table.col("tag");

  TagCorpus corpus;
  corpus.tags_by_advertiser.resize(market.advertisers.size());
  int unknown = 0;
  for (std::size_t r = 0; r < tag_table.rows.size(); ++r) {
    const auto a = market.advertisers.find(tag_table.cell(r, c_a));
    if (!a) {
      ++unknown;
      continue;
    }
    ++corpus.tags_by_advertiser[*a][tag_table.cell(r, c_tag)];
  }
  if (unknown > 0)
    std::cerr << "warning: " << unknown << " tag rows for advertisers outside the market\n";

  const TfidfMatrix tfidf = build_tfidf(corpus);
  for (int a : tfidf.excluded)
    std::cerr << "warning: advertiser " << market.advertisers.name(a)
              << " has no tags; excluded from similarity\n";
  const SimilarityMatrix similarity = cosine_matrix(tfidf);

  const auto observed = observed_ctr_table(market);
  KnownCtrTable table;
  table.by_site.resize(market.sites.size());
  for (int s = 0; s < market.sites.size(); ++s)
    for (int a = 0; a < market.advertisers.size(); ++a)
      if (std::isfinite(observed[a][s])) table.by_site[s].push_back({a, observed[a][s]});

  const auto comments = provenance(cfg, "pool-ctr");
  std::vector<double> predicted_at_observed, observed_at_observed;
  {
    CsvWriter out(out_path(cfg, "ctr_predictions.csv"),
                  {"advertiser_id", "site_id", "ctr_pred", "peer_count"}, comments);
    for (int a = 0; a < market.advertisers.size(); ++a)
      for (int s = 0; s < market.sites.size(); ++s) {
        const CtrPrediction pred = predict_ctr(similarity, table, a, s);
        out.write_row({market.advertisers.name(a), market.sites.name(s),
                       pred.valid ? format_double(pred.ctr) : "",
                       std::to_string(pred.peer_count)});
        if (pred.valid && std::isfinite(observed[a][s])) {
          predicted_at_observed.push_back(pred.ctr);
          observed_at_observed.push_back(observed[a][s]);
        }
      }
    out.close();
  }
  if (static_cast<int>(predicted_at_observed.size()) >= cfg.pooling.bins) {
    const auto bins = calibration_bins(predicted_at_observed, observed_at_observed,
                                       cfg.pooling.bins, cfg.seed);
    CsvWriter out(out_path(cfg, "calibration.csv"),
                  {"bin", "mean_predicted", "mean_observed", "ci_lo", "ci_hi", "count"},
                  comments);
    for (std::size_t b = 0; b < bins.size(); ++b)
      out.write_row({std::to_string(b), format_double(bins[b].mean_predicted),
                     format_double(bins[b].mean_observed), format_double(bins[b].ci_lo),
                     format_double(bins[b].ci_hi), std::to_string(bins[b].count)});
    out.close();
    std::cout << "calibration slope " << calibration_slope(bins) << " over " << bins.size()
              << " bins\n";
  }
  return 0;
}

int cmd_analyze(const AppConfig& cfg) {
  const MarketData market = load_market_from_config(cfg);
  const auto comments = provenance(cfg, "analyze");

  const CpcByRetention cpc = cpc_by_retention(market);
  {
    CsvWriter out(out_path(cfg, "cpc_summary.csv"),
                  {"group", "pairs", "zero_click_pairs", "median_cpc"}, comments);
    auto row = [&](const std::string& name, const CpcGroup& g) {
      out.write_row({name, std::to_string(g.cpc.size()),
                     std::to_string(g.zero_click_pairs),
                     g.cpc.empty() ? "" : format_double(median_of(g.cpc))});
    };
    row("continued", cpc.continued);
    row("abandoned", cpc.abandoned);
    out.close();
  }
  {
    const auto series = active_sites_series(market);
    CsvWriter out(out_path(cfg, "active_sites.csv"),
                  {"day", "mean_sites", "active_advertisers"}, comments);
    for (const auto& pt : series)
      out.write_row({std::to_string(pt.day), format_double(pt.mean_sites),
                     std::to_string(pt.active_advertisers)});
    out.close();
  }
  {
    const auto series = persistence_series(market, 2, cfg.seed);
    CsvWriter out(out_path(cfg, "persistence.csv"),
                  {"period", "mean_jaccard", "ci_lo", "ci_hi", "advertisers"}, comments);
    for (const auto& pt : series)
      out.write_row({std::to_string(pt.period), format_double(pt.mean_jaccard),
                     format_double(pt.ci_lo), format_double(pt.ci_hi),
                     std::to_string(pt.advertisers)});
    out.close();
  }
  {
    const auto ctr = observed_ctr_table(market);
    std::vector<CtrRecord> records;
    for (int a = 0; a < market.advertisers.size(); ++a)
      for (int s = 0; s < market.sites.size(); ++s)
        if (std::isfinite(ctr[a][s])) records.push_back({a, s, ctr[a][s]});
    CsvWriter out(out_path(cfg, "ctr_anova.csv"),
                  {"term", "df", "sum_squares", "percent"}, comments);
    if (!records.empty()) {
      try {
        const AnovaResult anova = variance_decomposition(records);
        for (const auto& term : anova.terms)
          out.write_row({term.name, std::to_string(term.df),
                         format_double(term.sum_squares), format_double(term.percent)});
      } catch (const std::domain_error& e) {
        std::cerr << "anova skipped: " << e.what() << "\n";
      }
    }
    out.close();
  }
  std::cout << "analysis written to " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace
}  // namespace adlearn

int main(int argc, char** argv) {
  CLI::App app{"direct-buy ad market learning: simulation, estimation, counterfactuals"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  std::string out_override;
  int threads_override = -1;

  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--seed", seed_override, "override config seed")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--out", out_override, "override output directory");
  app.add_option("--threads", threads_override, "override thread cap");

  const std::vector<std::pair<std::string, int (*)(const adlearn::AppConfig&)>> commands = {
      {"validate", adlearn::cmd_validate},
      {"simulate-market", adlearn::cmd_simulate_market},
      {"estimate", adlearn::cmd_estimate},
      {"counterfactual", adlearn::cmd_counterfactual},
      {"pool-ctr", adlearn::cmd_pool_ctr},
      {"analyze", adlearn::cmd_analyze},
  };
  for (const auto& [name, fn] : commands) app.add_subcommand(name);

  CLI11_PARSE(app, argc, argv);

  try {
    adlearn::AppConfig cfg = adlearn::load_config(config_path);
    if (seed_given) {
      cfg.seed = seed_override;
      cfg.market.seed = seed_override;
    }
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (threads_override >= 0) cfg.threads = threads_override;
    for (const auto& [name, fn] : commands)
      if (app.got_subcommand(name)) return fn(cfg);
    std::cerr << "no command\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
