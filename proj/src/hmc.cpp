#include "adlearn/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace adlearn {

namespace {

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  int counter = 0;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = 0.0;
    h_bar = 0.0;
    counter = 0;
  }
  void update(double accept_prob, double target) {
    ++counter;
    const double eta = 1.0 / (counter + t0);
    h_bar = (1.0 - eta) * h_bar + eta * (target - accept_prob);
    log_eps = mu - std::sqrt(static_cast<double>(counter)) / gamma * h_bar;
    const double w = std::pow(counter, -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
  double current() const { return std::exp(log_eps); }
  double adapted() const { return std::exp(log_eps_bar); }
};

struct Welford {
  long long n = 0;
  std::vector<double> mean, m2;
  void reset(int dim) {
    n = 0;
    mean.assign(dim, 0.0);
    m2.assign(dim, 0.0);
  }
  void add(const std::vector<double>& x) {
    ++n;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d / n;
      m2[i] += d * (x[i] - mean[i]);
    }
  }
  std::vector<double> variance() const {
    std::vector<double> v(mean.size(), 1.0);
    if (n > 1)
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2[i] / (n - 1);
    return v;
  }
};

struct ChainState {
  std::vector<std::vector<double>> draws;
  double step_size = 0.0;
  std::vector<double> inv_metric;
  double accept_sum = 0.0;
  long long divergences = 0;
  long long floor_hits = 0;
  bool all_divergent = true;
};

class ChainRunner {
 public:
  ChainRunner(const LogDensityGrad& target, int dim, const SamplerConfig& cfg, int chain_id)
      : target_(target),
        dim_(dim),
        cfg_(cfg),
        rng_({cfg.seed, 0x41646c6561726eULL, static_cast<std::uint64_t>(chain_id)}),
        chain_id_(chain_id) {}

  ChainState run() {
    ChainState out;
    std::vector<double> q(dim_, 0.0);
    if (!cfg_.inits.empty()) {
      q = cfg_.inits[chain_id_ % cfg_.inits.size()];
      if (static_cast<int>(q.size()) != dim_)
        throw std::invalid_argument("hmc_sample: init dimension mismatch");
    } else {
      for (auto& v : q) v = 0.1 * rng_.next_normal();
    }
    inv_metric_.assign(dim_, 1.0);
    grad_.assign(dim_, 0.0);
    logp_ = target_(q, grad_);
    if (!std::isfinite(logp_)) {
      // Jitter until we find a finite starting point.
      for (int tries = 0; tries < 100 && !std::isfinite(logp_); ++tries) {
        for (auto& v : q) v = 0.5 * rng_.next_normal();
        logp_ = target_(q, grad_);
      }
      if (!std::isfinite(logp_))
        throw std::runtime_error("hmc_sample: cannot find a finite starting point");
    }

    double eps = find_reasonable_epsilon(q);
    DualAveraging da;
    da.restart(eps);

    // Warmup windows: step-size-only buffers around expanding variance windows.
    const int warm = cfg_.warmup;
    int init_buf = 75, term_buf = 50, base_window = 25;
    if (warm < 150) {
      init_buf = std::max(1, static_cast<int>(0.15 * warm));
      term_buf = std::max(1, static_cast<int>(0.10 * warm));
      base_window = std::max(1, warm - init_buf - term_buf);
    }
    Welford welford;
    welford.reset(dim_);
    int window_end = init_buf + base_window;
    int window_size = base_window;

    for (int it = 0; it < warm; ++it) {
      const bool in_window = it >= init_buf && it < warm - term_buf;
      const double accept = transition(q, da.current());
      da.update(accept, cfg_.target_accept);
      if (in_window) {
        welford.add(q);
        if (it + 1 == std::min(window_end, warm - term_buf) && welford.n > 1) {
          auto var = welford.variance();
          const double n = static_cast<double>(welford.n);
          for (int i = 0; i < dim_; ++i)
            inv_metric_[i] = var[i] * n / (n + 5.0) + 1e-3 * (5.0 / (n + 5.0));
          welford.reset(dim_);
          da.restart(da.current());
          window_size *= 2;
          window_end += window_size;
        }
      }
    }
    eps = warm > 0 ? da.adapted() : da.current();
    out.step_size = eps;
    out.inv_metric = inv_metric_;

    out.draws.reserve(cfg_.samples);
    for (int it = 0; it < cfg_.samples; ++it) {
      const double accept = transition(q, eps, &out.divergences);
      out.accept_sum += accept;
      out.draws.push_back(q);
      if (accept > 0.0) out.all_divergent = false;
    }
    return out;
  }

 private:
  double find_reasonable_epsilon(std::vector<double>& q) {
    double eps = 1.0;
    std::vector<double> p(dim_), q1 = q, g1 = grad_;
    for (int i = 0; i < dim_; ++i) p[i] = rng_.next_normal() / std::sqrt(inv_metric_[i]);
    const double h0 = hamiltonian(logp_, p);
    double logp1 = leapfrog(q1, p, g1, eps);
    double h1 = hamiltonian(logp1, p);
    if (!std::isfinite(h1)) {
      while (!std::isfinite(h1) && eps > 1e-10) {
        eps *= 0.5;
        q1 = q;
        g1 = grad_;
        std::vector<double> p1(dim_);
        for (int i = 0; i < dim_; ++i) p1[i] = p[i];
        logp1 = leapfrog(q1, p1, g1, eps);
        h1 = hamiltonian(logp1, p1);
      }
      return std::max(eps, 1e-10);
    }
    const double delta = h0 - h1;  // log acceptance
    const double dir = delta > std::log(0.5) ? 1.0 : -1.0;
    for (int iter = 0; iter < 50; ++iter) {
      q1 = q;
      g1 = grad_;
      std::vector<double> p1 = p;
      logp1 = leapfrog(q1, p1, g1, eps);
      h1 = hamiltonian(logp1, p1);
      const double d = std::isfinite(h1) ? h0 - h1 : -kInf;
      if (dir > 0 ? d <= std::log(0.5) : d >= std::log(0.5)) break;
      eps *= dir > 0 ? 2.0 : 0.5;
      if (eps > 1e6 || eps < 1e-10) break;
    }
    return eps;
  }

  double hamiltonian(double logp, const std::vector<double>& p) const {
    if (!std::isfinite(logp)) return kInf;
    double kin = 0.0;
    for (int i = 0; i < dim_; ++i) kin += inv_metric_[i] * p[i] * p[i];
    return -logp + 0.5 * kin;
  }

  // One leapfrog step chain of length 1; updates q, p, grad in place and
  // returns the new log density.
  double leapfrog(std::vector<double>& q, std::vector<double>& p, std::vector<double>& grad,
                  double eps) {
    for (int i = 0; i < dim_; ++i) p[i] += 0.5 * eps * grad[i];
    for (int i = 0; i < dim_; ++i) q[i] += eps * inv_metric_[i] * p[i];
    const double logp = target_(q, grad);
    if (!std::isfinite(logp)) return -kInf;
    for (int i = 0; i < dim_; ++i) p[i] += 0.5 * eps * grad[i];
    return logp;
  }

  // One HMC transition with jittered trajectory length. Returns the
  // acceptance probability (0 for divergent proposals).
  double transition(std::vector<double>& q, double eps, long long* divergences = nullptr) {
    std::vector<double> p(dim_);
    for (int i = 0; i < dim_; ++i) p[i] = rng_.next_normal() / std::sqrt(inv_metric_[i]);
    const double h0 = hamiltonian(logp_, p);
    const int steps = 1 + static_cast<int>(rng_.next_below(
                              static_cast<std::uint64_t>(std::max(1, cfg_.max_leapfrog))));
    std::vector<double> q1 = q, g1 = grad_;
    double logp1 = logp_;
    bool divergent = false;
    for (int s = 0; s < steps; ++s) {
      logp1 = leapfrog(q1, p, g1, eps);
      const double h1 = hamiltonian(logp1, p);
      if (!std::isfinite(h1) || h1 - h0 > 1000.0) {
        divergent = true;
        break;
      }
    }
    double accept = 0.0;
    if (!divergent) {
      const double h1 = hamiltonian(logp1, p);
      accept = std::min(1.0, std::exp(h0 - h1));
      if (rng_.next_u01() < accept) {
        q = q1;
        grad_ = g1;
        logp_ = logp1;
      }
    } else if (divergences) {
      ++*divergences;
    }
    return accept;
  }

  const LogDensityGrad& target_;
  int dim_;
  SamplerConfig cfg_;
  KeyedRng rng_;
  int chain_id_;
  std::vector<double> inv_metric_;
  std::vector<double> grad_;
  double logp_ = 0.0;
};

}  // namespace

HmcResult hmc_sample(const LogDensityGrad& target, int dim, const SamplerConfig& config) {
  if (config.chains < 1 || config.samples < 1 || config.warmup < 0 || dim < 1 ||
      !(config.target_accept > 0.0 && config.target_accept < 1.0))
    throw std::invalid_argument("hmc_sample: invalid sampler configuration");

  const int threads = config.threads > 0
                          ? config.threads
                          : std::max(1u, std::thread::hardware_concurrency());
  std::vector<ChainState> states(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);

  auto run_chain = [&](int c) {
    try {
      ChainRunner runner(target, dim, config, c);
      states[c] = runner.run();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  for (int start = 0; start < config.chains; start += threads) {
    std::vector<std::thread> pool;
    const int end = std::min(config.chains, start + threads);
    for (int c = start; c < end; ++c) pool.emplace_back(run_chain, c);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  HmcResult result;
  bool any_ok = false;
  for (auto& st : states) {
    if (!st.all_divergent) any_ok = true;
    result.chains.push_back(std::move(st.draws));
    result.step_size.push_back(st.step_size);
    result.inv_metric.push_back(st.inv_metric);
    result.accept_rate.push_back(st.accept_sum / config.samples);
    result.divergences += st.divergences;
  }
  if (!any_ok)
    throw std::runtime_error("hmc_sample: all chains fully divergent; no usable draws");
  return result;
}

namespace {

// Mean-based ESS of one parameter across split chains, Geyer initial
// monotone sequence on paired autocorrelations.
double ess_from_sequences(const std::vector<std::vector<double>>& seqs) {
  const int m = static_cast<int>(seqs.size());
  const int n = static_cast<int>(seqs[0].size());
  if (n < 4) return kNaN;

  std::vector<double> chain_mean(m), chain_var(m);
  double grand_mean = 0.0;
  for (int c = 0; c < m; ++c) {
    double mu = 0.0;
    for (double v : seqs[c]) mu += v;
    mu /= n;
    chain_mean[c] = mu;
    double s2 = 0.0;
    for (double v : seqs[c]) s2 += (v - mu) * (v - mu);
    chain_var[c] = s2 / (n - 1);
    grand_mean += mu;
  }
  grand_mean /= m;

  double w = 0.0;
  for (double v : chain_var) w += v;
  w /= m;
  double b_over_n = 0.0;
  if (m > 1) {
    for (double mu : chain_mean) b_over_n += (mu - grand_mean) * (mu - grand_mean);
    b_over_n /= (m - 1);
  }
  const double var_plus = w * (n - 1) / n + b_over_n;
  if (!(var_plus > 0.0)) return kNaN;

  // Autocovariances per chain, averaged.
  const int max_lag = n - 1;
  std::vector<double> acov(max_lag, 0.0);
  for (int c = 0; c < m; ++c) {
    for (int t = 0; t < max_lag; ++t) {
      double s = 0.0;
      for (int i = 0; i + t < n; ++i)
        s += (seqs[c][i] - chain_mean[c]) * (seqs[c][i + t] - chain_mean[c]);
      acov[t] += s / n;
    }
  }
  for (auto& v : acov) v /= m;

  std::vector<double> rho(max_lag);
  for (int t = 0; t < max_lag; ++t) rho[t] = 1.0 - (w - acov[t]) / var_plus;

  // Paired sums: keep while positive, enforce monotone decrease.
  double tau = -1.0 + 2.0 * rho[0];
  double prev_pair = kInf;
  for (int t = 1; t + 1 < max_lag; t += 2) {
    double pair = rho[t] + rho[t + 1];
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m) * n + 10.0));
  const double ess = static_cast<double>(m) * n / tau;
  return std::min(ess, static_cast<double>(m) * n * std::log10(static_cast<double>(m) * n));
}

std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& seqs) {
  std::vector<std::vector<double>> out;
  for (const auto& s : seqs) {
    const int half = static_cast<int>(s.size()) / 2;
    out.emplace_back(s.begin(), s.begin() + half);
    out.emplace_back(s.begin() + half, s.begin() + 2 * half);
  }
  return out;
}

// Rank-normalize pooled values: z = Phi^-1((rank - 3/8) / (N + 1/4)),
// average ranks for ties.
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& seqs) {
  std::vector<std::pair<double, std::pair<int, int>>> all;
  for (int c = 0; c < static_cast<int>(seqs.size()); ++c)
    for (int i = 0; i < static_cast<int>(seqs[c].size()); ++i)
      all.push_back({seqs[c][i], {c, i}});
  std::sort(all.begin(), all.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  const double n_total = static_cast<double>(all.size());
  std::vector<std::vector<double>> out(seqs.size());
  for (std::size_t c = 0; c < seqs.size(); ++c) out[c].resize(seqs[c].size());
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    const double z = norm_quantile((avg_rank - 0.375) / (n_total + 0.25));
    for (std::size_t k = i; k < j; ++k)
      out[all[k].second.first][all[k].second.second] = z;
    i = j;
  }
  return out;
}

double rhat_of(const std::vector<std::vector<double>>& seqs) {
  const int m = static_cast<int>(seqs.size());
  const int n = static_cast<int>(seqs[0].size());
  double grand = 0.0;
  std::vector<double> mean(m), var(m);
  for (int c = 0; c < m; ++c) {
    double mu = 0.0;
    for (double v : seqs[c]) mu += v;
    mu /= n;
    mean[c] = mu;
    double s2 = 0.0;
    for (double v : seqs[c]) s2 += (v - mu) * (v - mu);
    var[c] = s2 / (n - 1);
    grand += mu;
  }
  grand /= m;
  double w = 0.0;
  for (double v : var) w += v;
  w /= m;
  double b = 0.0;
  for (double mu : mean) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (m - 1);
  if (!(w > 0.0)) return b > 0.0 ? kInf : kNaN;  // chains stuck at different values
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double quantile_sorted(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - lo;
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

ChainDiagnostics diagnostics(const std::vector<std::vector<std::vector<double>>>& chains) {
  if (chains.empty() || chains[0].empty())
    throw std::domain_error("diagnostics: no draws");
  const int dim = static_cast<int>(chains[0][0].size());
  long long total_draws = 0;
  for (const auto& c : chains) total_draws += static_cast<long long>(c.size());
  if (total_draws < 4) throw std::domain_error("diagnostics: need at least 4 draws");

  ChainDiagnostics out;
  out.split_rhat.assign(dim, kNaN);
  out.ess_bulk.assign(dim, kNaN);
  out.ess_tail.assign(dim, kNaN);

  for (int d = 0; d < dim; ++d) {
    std::vector<std::vector<double>> seqs;
    for (const auto& chain : chains) {
      std::vector<double> s;
      s.reserve(chain.size());
      for (const auto& draw : chain) s.push_back(draw[d]);
      seqs.push_back(std::move(s));
    }
    auto split = split_halves(seqs);

    bool constant = true;
    const double first = split[0][0];
    for (const auto& s : split)
      for (double v : s)
        if (v != first) constant = false;
    if (constant) {
      out.flags.push_back("parameter " + std::to_string(d) +
                          ": constant draws; R-hat undefined, ESS degenerate");
      continue;
    }

    auto z = rank_normalize(split);
    // Rank-normalized split R-hat, folded variant for scale differences.
    const double rhat_bulk = rhat_of(z);
    std::vector<double> pooled;
    for (const auto& s : split) pooled.insert(pooled.end(), s.begin(), s.end());
    const double med = quantile_sorted(pooled, 0.5);
    auto folded = split;
    for (auto& s : folded)
      for (auto& v : s) v = std::fabs(v - med);
    auto zf = rank_normalize(folded);
    const double rhat_tail = rhat_of(zf);
    out.split_rhat[d] = std::max(rhat_bulk, rhat_tail);

    out.ess_bulk[d] = ess_from_sequences(z);

    const double q05 = quantile_sorted(pooled, 0.05);
    const double q95 = quantile_sorted(pooled, 0.95);
    auto indicator_ess = [&](double q, bool below) {
      auto ind = split;
      for (auto& s : ind)
        for (auto& v : s) v = below ? (v <= q ? 1.0 : 0.0) : (v >= q ? 1.0 : 0.0);
      return ess_from_sequences(ind);
    };
    out.ess_tail[d] = std::min(indicator_ess(q05, true), indicator_ess(q95, false));
  }
  return out;
}

}  // namespace adlearn
