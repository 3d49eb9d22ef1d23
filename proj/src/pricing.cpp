#include "adlearn/pricing.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace adlearn {

PriceModel fit_price_model(const std::vector<PriceObservation>& observations) {
  if (observations.empty()) throw std::invalid_argument("fit_price_model: no observations");
  std::set<int> weeks, sites;
  for (const auto& o : observations) {
    if (o.days < 1) throw std::invalid_argument("fit_price_model: days must be >= 1");
    if (!(o.price > 0.0)) throw std::invalid_argument("fit_price_model: price must be > 0");
    weeks.insert(o.week);
    sites.insert(o.site);
  }
  const std::vector<int> week_levels(weeks.begin(), weeks.end());
  const std::vector<int> site_levels(sites.begin(), sites.end());
  std::map<int, int> week_col, site_col;
  for (std::size_t i = 1; i < week_levels.size(); ++i)
    week_col[week_levels[i]] = static_cast<int>(i - 1);
  for (std::size_t i = 1; i < site_levels.size(); ++i)
    site_col[site_levels[i]] = static_cast<int>(i - 1);

  const int n = static_cast<int>(observations.size());
  const int kw = static_cast<int>(week_levels.size()) - 1;
  const int ks = static_cast<int>(site_levels.size()) - 1;
  const int k = 1 + kw + ks + 1;  // intercept, week dummies, site dummies, log days

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const auto& o = observations[i];
    X(i, 0) = 1.0;
    if (auto it = week_col.find(o.week); it != week_col.end()) X(i, 1 + it->second) = 1.0;
    if (auto it = site_col.find(o.site); it != site_col.end())
      X(i, 1 + kw + it->second) = 1.0;
    X(i, k - 1) = std::log(static_cast<double>(o.days));
    y(i) = std::log(o.price);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    // Name the pivoted-out columns for the error message.
    auto col_name = [&](int c) -> std::string {
      if (c == 0) return "intercept";
      if (c <= kw) return "week " + std::to_string(week_levels[c]);
      if (c <= kw + ks) return "site " + std::to_string(site_levels[c - kw]);
      return "log(days)";
    };
    const auto perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << "fit_price_model: design is rank deficient (rank " << qr.rank() << " of " << k
        << "); collinear levels:";
    for (int j = qr.rank(); j < k; ++j) msg << " " << col_name(perm(j));
    throw std::runtime_error(msg.str());
  }
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;
  const double rss = resid.squaredNorm();
  const double mean_y = y.mean();
  const double tss = (y.array() - mean_y).matrix().squaredNorm();

  PriceModel model;
  model.lambda = beta(k - 1);
  model.resid_var = n > k ? rss / (n - k) : 0.0;
  model.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  for (std::size_t i = 0; i < week_levels.size(); ++i)
    model.mu_w[week_levels[i]] = beta(0) + (i == 0 ? 0.0 : beta(1 + week_col[week_levels[i]]));
  for (std::size_t i = 0; i < site_levels.size(); ++i)
    model.mu_s[site_levels[i]] = i == 0 ? 0.0 : beta(1 + kw + site_col[site_levels[i]]);
  return model;
}

double predict_price(const PriceModel& model, int site, int week, int days) {
  const auto w = model.mu_w.find(week);
  if (w == model.mu_w.end())
    throw std::out_of_range("predict_price: unknown week " + std::to_string(week));
  const auto s = model.mu_s.find(site);
  if (s == model.mu_s.end())
    throw std::out_of_range("predict_price: unknown site " + std::to_string(site));
  if (days < 1) throw std::invalid_argument("predict_price: days must be >= 1");
  return std::exp(0.5 * model.resid_var + w->second + s->second +
                  model.lambda * std::log(static_cast<double>(days)));
}

std::map<std::pair<int, int>, Menu> impute_menu_availability(
    const std::vector<PriceObservation>& observed, const PriceModel& model, int n_weeks,
    int window) {
  // (site, duration) -> weeks at which it was observed.
  std::map<std::pair<int, int>, std::set<int>> seen;
  std::set<int> site_ids;
  for (const auto& o : observed) {
    seen[{o.site, o.days}].insert(o.week);
    site_ids.insert(o.site);
  }
  // A week with no observed offer anywhere has no fitted effect; borrow the
  // nearest observed week's.
  auto nearest_week = [&](int w) {
    if (model.mu_w.count(w)) return w;
    auto up = model.mu_w.lower_bound(w);
    if (up == model.mu_w.end()) return model.mu_w.rbegin()->first;
    if (up == model.mu_w.begin()) return up->first;
    auto down = std::prev(up);
    return (w - down->first <= up->first - w) ? down->first : up->first;
  };
  std::map<std::pair<int, int>, Menu> menus;
  for (int site : site_ids) {
    for (int w = 1; w <= n_weeks; ++w) {
      std::vector<SubscriptionOption> options;
      for (const auto& [key, obs_weeks] : seen) {
        if (key.first != site) continue;
        const auto lo = obs_weeks.lower_bound(w - window);
        if (lo != obs_weeks.end() && *lo <= w + window)
          options.push_back({key.second, dollars_to_cents(predict_price(
                                             model, site, nearest_week(w), key.second))});
      }
      if (options.empty()) continue;
      std::sort(options.begin(), options.end(),
                [](const auto& a, const auto& b) { return a.days < b.days; });
      menus.emplace(std::make_pair(site, w), Menu(options));
    }
  }
  return menus;
}

}  // namespace adlearn
