#include "adlearn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "adlearn/csv.hpp"

namespace adlearn {

int IdIndex::intern(const std::string& id) {
  auto it = index_.find(id);
  if (it != index_.end()) return it->second;
  const int idx = static_cast<int>(names_.size());
  names_.push_back(id);
  index_.emplace(id, idx);
  return idx;
}

std::optional<int> IdIndex::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int month_of_week(int week) {
  if (week < 1) throw std::domain_error("month_of_week: weeks are 1-based");
  static constexpr int kCumDays[12] = {31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334, 365};
  const int day = (week - 1) * 7 + 1;  // 1-based day since 2007-01-01
  const int year = (day - 1) / 365;
  const int day_in_year = (day - 1) % 365 + 1;
  for (int m = 0; m < 12; ++m)
    if (day_in_year <= kCumDays[m]) return 12 * year + m;
  return 12 * year + 11;
}

namespace {

void check(ValidationReport* report, bool ok, const std::string& message) {
  if (ok) return;
  if (report)
    report->violations.push_back(message);
  else
    throw std::runtime_error(message);
}

}  // namespace

MarketData load_market(const std::string& transactions_path, const std::string& sites_path,
                       const std::string& menus_path, ValidationReport* report) {
  MarketData market;

  const CsvTable sites = read_csv(sites_path);
  const std::size_t c_sid = sites.col("site_id");
  const std::size_t c_traffic = sites.col("daily_traffic");
  for (std::size_t r = 0; r < sites.rows.size(); ++r) {
    const std::string ctx = sites_path + " row " + std::to_string(r + 1);
    const int s = market.sites.intern(sites.cell(r, c_sid));
    const double t = parse_double(sites.cell(r, c_traffic), ctx);
    check(report, t > 0.0, ctx + ": daily_traffic must be > 0");
    if (market.traffic.size() <= static_cast<std::size_t>(s)) market.traffic.resize(s + 1, 1.0);
    market.traffic[s] = t > 0.0 ? t : 1.0;
  }

  const CsvTable tx = read_csv(transactions_path);
  const std::size_t c_aid = tx.col("advertiser_id");
  const std::size_t c_tsid = tx.col("site_id");
  const std::size_t c_week = tx.col("week");
  const std::size_t c_days = tx.col("days");
  const std::size_t c_price = tx.col("price");
  const std::size_t c_impr = tx.col("impressions");
  const std::size_t c_clicks = tx.col("clicks");
  for (std::size_t r = 0; r < tx.rows.size(); ++r) {
    const std::string ctx = transactions_path + " row " + std::to_string(r + 1);
    Transaction t;
    t.advertiser = market.advertisers.intern(tx.cell(r, c_aid));
    const auto site = market.sites.find(tx.cell(r, c_tsid));
    check(report, site.has_value(), ctx + ": unknown site_id '" + tx.cell(r, c_tsid) + "'");
    t.site = site.value_or(0);
    t.week = static_cast<int>(parse_int(tx.cell(r, c_week), ctx));
    t.days = static_cast<int>(parse_int(tx.cell(r, c_days), ctx));
    t.price = dollars_to_cents(parse_double(tx.cell(r, c_price), ctx));
    t.impressions = parse_int(tx.cell(r, c_impr), ctx);
    t.clicks = parse_int(tx.cell(r, c_clicks), ctx);
    check(report, t.week >= 1, ctx + ": week must be >= 1");
    check(report, t.days >= 1, ctx + ": days must be >= 1");
    check(report, t.price >= 0, ctx + ": price must be >= 0");
    check(report, t.impressions >= 0, ctx + ": impressions must be >= 0");
    check(report, t.clicks >= 0 && t.clicks <= t.impressions,
          ctx + ": need 0 <= clicks <= impressions");
    market.transactions.push_back(t);
    // The decision horizon is the last week with an observed decision; a
    // trailing run may extend past it without adding choice occasions.
    market.n_weeks = std::max(market.n_weeks, t.week);
  }

  market.join_week.assign(market.advertisers.size(), market.n_weeks + 1);
  for (const auto& t : market.transactions)
    market.join_week[t.advertiser] = std::min(market.join_week[t.advertiser], t.week);

  if (!menus_path.empty()) {
    const CsvTable menus = read_csv(menus_path);
    const std::size_t m_sid = menus.col("site_id");
    const std::size_t m_week = menus.col("week");
    const std::size_t m_days = menus.col("days");
    const std::size_t m_price = menus.col("price");
    std::map<std::pair<int, int>, std::vector<SubscriptionOption>> options;
    for (std::size_t r = 0; r < menus.rows.size(); ++r) {
      const std::string ctx = menus_path + " row " + std::to_string(r + 1);
      const auto site = market.sites.find(menus.cell(r, m_sid));
      check(report, site.has_value(), ctx + ": unknown site_id '" + menus.cell(r, m_sid) + "'");
      if (!site) continue;
      const int week = static_cast<int>(parse_int(menus.cell(r, m_week), ctx));
      const int days = static_cast<int>(parse_int(menus.cell(r, m_days), ctx));
      const Cents price = dollars_to_cents(parse_double(menus.cell(r, m_price), ctx));
      check(report, week >= 1, ctx + ": week must be >= 1");
      options[{*site, week}].push_back({days, price});
      market.n_weeks = std::max(market.n_weeks, week);
    }
    for (auto& [key, opts] : options) {
      std::sort(opts.begin(), opts.end(),
                [](const auto& a, const auto& b) { return a.days < b.days; });
      try {
        market.menus.emplace(key, Menu(opts));
      } catch (const std::exception& e) {
        check(report, false,
              menus_path + ": site " + market.sites.name(key.first) + " week " +
                  std::to_string(key.second) + ": " + e.what());
      }
    }
  }
  return market;
}

ValidationReport validate_market(const MarketData& market) {
  ValidationReport report;
  // One subscription per advertiser-site-week, no purchase while blocked,
  // purchased durations present on the menu when menus exist.
  std::map<std::pair<int, int>, std::vector<const Transaction*>> by_pair;
  for (const auto& t : market.transactions) by_pair[{t.advertiser, t.site}].push_back(&t);
  for (auto& [pair, txs] : by_pair) {
    std::sort(txs.begin(), txs.end(),
              [](const Transaction* a, const Transaction* b) { return a->week < b->week; });
    int blocked_until = 0;
    for (const Transaction* t : txs) {
      std::ostringstream where;
      where << "advertiser " << market.advertisers.name(pair.first) << " site "
            << market.sites.name(pair.second) << " week " << t->week;
      if (t->week < blocked_until)
        report.violations.push_back(where.str() + ": purchase while subscription running");
      blocked_until = std::max(blocked_until, t->week + blocked_weeks(t->days));
      if (!market.menus.empty()) {
        const auto menu = market.menus.find({t->site, t->week});
        if (menu == market.menus.end())
          report.violations.push_back(where.str() + ": no menu for this site-week");
        else if (!menu->second.find_days(t->days))
          report.violations.push_back(where.str() + ": purchased duration not on menu");
      }
    }
  }
  for (auto it = by_pair.begin(); it != by_pair.end(); ++it) {
    auto next = std::next(it);
    if (next != by_pair.end() && next->first == it->first)
      report.violations.push_back("duplicate advertiser-site grouping");  // unreachable
  }
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& t : market.transactions)
    if (!seen.insert({t.advertiser, t.site, t.week}).second)
      report.violations.push_back("advertiser " + market.advertisers.name(t.advertiser) +
                                  " site " + market.sites.name(t.site) + " week " +
                                  std::to_string(t.week) +
                                  ": duplicate subscription in the same week");
  return report;
}

void impute_menus_from_transactions(MarketData& market, int window) {
  std::vector<PriceObservation> prices;
  prices.reserve(market.transactions.size());
  for (const auto& t : market.transactions)
    prices.push_back({t.site, t.week, t.days, cents_to_dollars(t.price)});
  const PriceModel model = fit_price_model(prices);
  market.menus = impute_menu_availability(prices, model, market.n_weeks, window);
}

std::vector<ChoiceObservation> build_observations(const MarketData& market) {
  const int A = market.advertisers.size();
  const int S = market.sites.size();
  // Purchase lookup and per-pair state.
  std::map<std::tuple<int, int, int>, const Transaction*> purchase_at;
  for (const auto& t : market.transactions) purchase_at[{t.advertiser, t.site, t.week}] = &t;

  std::vector<std::vector<BeliefState>> beliefs(A, std::vector<BeliefState>(S));
  std::vector<std::vector<int>> blocked_until(A, std::vector<int>(S, 0));
  std::vector<std::vector<int>> first_ad_week(A, std::vector<int>(S, 0));  // 0 = never
  // Counts become available at the completion week.
  std::map<int, std::vector<const Transaction*>> completing;
  for (const auto& t : market.transactions)
    completing[t.week + blocked_weeks(t.days)].push_back(&t);

  std::vector<ChoiceObservation> observations;
  for (int w = 1; w <= market.n_weeks; ++w) {
    if (auto it = completing.find(w); it != completing.end())
      for (const Transaction* t : it->second)
        beliefs[t->advertiser][t->site] =
            update_beliefs(beliefs[t->advertiser][t->site], t->impressions, t->clicks);
    for (int a = 0; a < A; ++a) {
      if (market.join_week[a] > w) continue;
      for (int s = 0; s < S; ++s) {
        if (blocked_until[a][s] > w) continue;
        const auto menu_it = market.menus.find({s, w});
        if (menu_it == market.menus.end()) continue;  // nothing offered
        ChoiceObservation obs;
        obs.advertiser = a;
        obs.site = s;
        obs.week = w;
        obs.menu = menu_it->second;
        obs.belief = beliefs[a][s];
        obs.tau = first_ad_week[a][s] > 0 ? tau_bucket(w - first_ad_week[a][s]) : tau_bucket({});
        obs.month = month_of_week(w);
        const auto p = purchase_at.find({a, s, w});
        if (p != purchase_at.end()) {
          obs.chosen_days = p->second->days;
          blocked_until[a][s] = w + blocked_weeks(p->second->days);
          if (first_ad_week[a][s] == 0) first_ad_week[a][s] = w;
        }
        observations.push_back(std::move(obs));
      }
    }
  }
  return observations;
}

std::vector<std::vector<double>> observed_ctr_table(const MarketData& market) {
  const int A = market.advertisers.size();
  const int S = market.sites.size();
  std::vector<std::vector<std::int64_t>> impressions(A, std::vector<std::int64_t>(S, 0));
  std::vector<std::vector<std::int64_t>> clicks(A, std::vector<std::int64_t>(S, 0));
  for (const auto& t : market.transactions) {
    impressions[t.advertiser][t.site] += t.impressions;
    clicks[t.advertiser][t.site] += t.clicks;
  }
  std::vector<std::vector<double>> ctr(A, std::vector<double>(S, kNaN));
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s)
      if (impressions[a][s] > 0)
        ctr[a][s] = static_cast<double>(clicks[a][s]) / static_cast<double>(impressions[a][s]);
  return ctr;
}

void write_transactions_csv(const std::string& path, const MarketData& market,
                            const std::vector<std::string>& comments) {
  CsvWriter out(path, {"advertiser_id", "site_id", "week", "days", "price", "impressions",
                       "clicks"},
                comments);
  for (const auto& t : market.transactions)
    out.write_row({market.advertisers.name(t.advertiser), market.sites.name(t.site),
                   std::to_string(t.week), std::to_string(t.days),
                   format_double(cents_to_dollars(t.price)), std::to_string(t.impressions),
                   std::to_string(t.clicks)});
  out.close();
}

void write_sites_csv(const std::string& path, const MarketData& market,
                     const std::vector<std::string>& comments) {
  CsvWriter out(path, {"site_id", "daily_traffic"}, comments);
  for (int s = 0; s < market.sites.size(); ++s)
    out.write_row({market.sites.name(s), format_double(market.traffic[s])});
  out.close();
}

void write_menus_csv(const std::string& path, const MarketData& market,
                     const std::vector<std::string>& comments) {
  CsvWriter out(path, {"site_id", "week", "days", "price"}, comments);
  for (const auto& [key, menu] : market.menus)
    for (const auto& opt : menu.options())
      out.write_row({market.sites.name(key.first), std::to_string(key.second),
                     std::to_string(opt.days), format_double(opt.price_dollars())});
  out.close();
}

}  // namespace adlearn
