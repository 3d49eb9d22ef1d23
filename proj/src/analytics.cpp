#include "adlearn/analytics.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "adlearn/rng.hpp"
#include "adlearn/simulator.hpp"

namespace adlearn {

double jaccard(const std::set<int>& a, const std::set<int>& b, bool* both_empty) {
  if (both_empty) *both_empty = false;
  if (a.empty() && b.empty()) {
    if (both_empty) *both_empty = true;
    return 1.0;
  }
  int intersection = 0;
  for (int x : a)
    if (b.count(x)) ++intersection;
  const int uni = static_cast<int>(a.size() + b.size()) - intersection;
  return static_cast<double>(intersection) / uni;
}

std::vector<PersistencePoint> persistence_series(const MarketData& market, int period_weeks,
                                                 std::uint64_t bootstrap_seed,
                                                 int bootstrap_reps) {
  const int A = market.advertisers.size();
  // Publisher set per advertiser per period (relative to joining week).
  std::map<std::pair<int, int>, std::set<int>> sets;
  int max_period = -1;
  for (const auto& t : market.transactions) {
    const int rel_week = t.week - market.join_week[t.advertiser];
    const int period = rel_week / period_weeks;
    sets[{t.advertiser, period}].insert(t.site);
    max_period = std::max(max_period, period);
  }

  // Per advertiser, Jaccard against the most recent earlier period with a buy.
  std::map<int, std::vector<double>> values_by_period;
  for (int a = 0; a < A; ++a) {
    int prev_period = -1;
    for (int p = 0; p <= max_period; ++p) {
      const auto it = sets.find({a, p});
      if (it == sets.end()) continue;
      if (prev_period >= 0)
        values_by_period[p].push_back(jaccard(it->second, sets[{a, prev_period}]));
      prev_period = p;
    }
  }

  std::vector<PersistencePoint> series;
  KeyedRng rng{bootstrap_seed, 0x504552ULL};
  for (const auto& [period, values] : values_by_period) {
    PersistencePoint pt;
    pt.period = period;
    pt.advertisers = static_cast<int>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    pt.mean_jaccard = mean / values.size();
    std::vector<double> boot(bootstrap_reps);
    for (int r = 0; r < bootstrap_reps; ++r) {
      double m = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i)
        m += values[rng.next_below(values.size())];
      boot[r] = m / values.size();
    }
    std::sort(boot.begin(), boot.end());
    pt.ci_lo = boot[static_cast<std::size_t>(0.025 * (bootstrap_reps - 1))];
    pt.ci_hi = boot[static_cast<std::size_t>(0.975 * (bootstrap_reps - 1))];
    series.push_back(pt);
  }
  return series;
}

double CpcGroup::median() const {
  if (cpc.empty()) throw std::domain_error("CpcGroup::median: no finite CPC values");
  return median_of(cpc);
}

CpcByRetention cpc_by_retention(const MarketData& market) {
  struct PairTotal {
    Cents spend = 0;
    std::int64_t clicks = 0;
    int placements = 0;
  };
  std::map<std::pair<int, int>, PairTotal> totals;
  for (const auto& t : market.transactions) {
    auto& pt = totals[{t.advertiser, t.site}];
    pt.spend += t.price;
    pt.clicks += t.clicks;
    ++pt.placements;
  }
  CpcByRetention out;
  for (const auto& [pair, pt] : totals) {
    if (pt.spend <= 0) continue;
    CpcGroup& group = pt.placements >= 2 ? out.continued : out.abandoned;
    if (pt.clicks == 0)
      ++group.zero_click_pairs;
    else
      group.cpc.push_back(cents_to_dollars(pt.spend) / static_cast<double>(pt.clicks));
  }
  return out;
}

std::vector<ActiveSitesPoint> active_sites_series(const MarketData& market, int min_day) {
  const int A = market.advertisers.size();
  // First ad day per advertiser (day 1 = first day of the joining week's ad).
  std::vector<int> first_day(A, -1);
  for (const auto& t : market.transactions) {
    const int start = (t.week - 1) * 7 + 1;
    if (first_day[t.advertiser] < 0 || start < first_day[t.advertiser])
      first_day[t.advertiser] = start;
  }
  // Active site count per advertiser per relative day.
  std::map<std::pair<int, int>, std::set<int>> active;  // (advertiser, rel day) -> sites
  int max_day = 0;
  for (const auto& t : market.transactions) {
    const int start = (t.week - 1) * 7 + 1;
    for (int d = 0; d < t.days; ++d) {
      const int rel = start + d - first_day[t.advertiser] + 1;
      active[{t.advertiser, rel}].insert(t.site);
      max_day = std::max(max_day, rel);
    }
  }
  std::vector<ActiveSitesPoint> series;
  for (int day = min_day; day <= max_day; ++day) {
    ActiveSitesPoint pt;
    pt.day = day;
    double total = 0.0;
    for (int a = 0; a < A; ++a) {
      const auto it = active.find({a, day});
      if (it == active.end()) continue;
      total += static_cast<double>(it->second.size());
      ++pt.active_advertisers;
    }
    if (pt.active_advertisers == 0) continue;
    pt.mean_sites = total / pt.active_advertisers;
    series.push_back(pt);
  }
  return series;
}

AnovaResult variance_decomposition(const std::vector<CtrRecord>& records) {
  std::map<int, int> adv_level, site_level;
  for (const auto& r : records) {
    adv_level.emplace(r.advertiser, 0);
    site_level.emplace(r.site, 0);
  }
  if (adv_level.size() < 2 || site_level.size() < 2)
    throw std::domain_error("variance_decomposition: need >= 2 advertisers and >= 2 sites");
  {
    int k = 0;
    for (auto& [id, idx] : adv_level) idx = k++;
    k = 0;
    for (auto& [id, idx] : site_level) idx = k++;
  }
  const int n = static_cast<int>(records.size());
  const int ka = static_cast<int>(adv_level.size());
  const int ks = static_cast<int>(site_level.size());

  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = records[i].ctr;
  const double mean_y = y.mean();
  const double tss = (y.array() - mean_y).matrix().squaredNorm();

  // Sequential fits: advertiser only, then advertiser + publisher.
  auto rss_of = [&](bool with_sites) {
    const int k = 1 + (ka - 1) + (with_sites ? ks - 1 : 0);
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      const int ai = adv_level[records[i].advertiser];
      if (ai > 0) X(i, ai) = 1.0;
      if (with_sites) {
        const int si = site_level[records[i].site];
        if (si > 0) X(i, ka - 1 + si) = 1.0;
      }
    }
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    return (y - X * beta).squaredNorm();
  };
  const double rss_a = rss_of(false);
  const double rss_ab = rss_of(true);

  AnovaResult out;
  out.total_ss = tss;
  const double ss_a = tss - rss_a;
  const double ss_b = rss_a - rss_ab;
  const double ss_resid = rss_ab;
  const double denom = ss_a + ss_b + ss_resid;
  auto pct = [&](double ss) { return denom > 0.0 ? 100.0 * ss / denom : 0.0; };
  out.terms.push_back({"advertiser", ka - 1, ss_a, pct(ss_a)});
  out.terms.push_back({"publisher", ks - 1, ss_b, pct(ss_b)});
  out.terms.push_back({"residual", n - ka - ks + 1, ss_resid, pct(ss_resid)});
  return out;
}

}  // namespace adlearn
