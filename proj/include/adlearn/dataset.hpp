#pragma once

// Dataset schemas and the replay logic that turns transaction records into
// weekly choice observations: join weeks, blocked weeks, cumulative belief
// counts and tenure buckets.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adlearn/likelihood.hpp"
#include "adlearn/model.hpp"
#include "adlearn/pricing.hpp"

namespace adlearn {

// One completed subscription: advertiser_id,site_id,week,days,price,impressions,clicks.
struct Transaction {
  int advertiser = 0;
  int site = 0;
  int week = 0;  // 1-based
  int days = 0;
  Cents price = 0;
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
};

// Stable string-id <-> dense index mapping (first appearance order).
class IdIndex {
 public:
  int intern(const std::string& id);
  std::optional<int> find(const std::string& id) const;
  const std::string& name(int index) const { return names_.at(index); }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

// Weeks start on 2007-01-01; a week's month is the calendar month of its
// first day. Index 0 = January 2007.
int month_of_week(int week);

// Weeks a subscription of x days occupies (the next decision is ceil(x/7)
// weeks later).
inline int blocked_weeks(int days) { return (days + 6) / 7; }

struct MarketData {
  IdIndex advertisers;
  IdIndex sites;
  std::vector<double> traffic;  // per site index
  int n_weeks = 0;
  int n_months = 0;
  std::vector<Transaction> transactions;
  std::map<std::pair<int, int>, Menu> menus;  // (site, week)
  std::vector<int> join_week;                 // per advertiser, first week in data

  ParamLayout layout() const {
    return ParamLayout{advertisers.size(), sites.size(), n_months};
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Loaders; schema problems throw, invariant problems are collected when a
// report is passed (otherwise they throw too).
MarketData load_market(const std::string& transactions_path, const std::string& sites_path,
                       const std::string& menus_path = "", ValidationReport* report = nullptr);

ValidationReport validate_market(const MarketData& market);

// Menus from the transactions themselves: fit the pricing model on observed
// purchases and impute availability within the window. Used when no explicit
// menus file is supplied.
void impute_menus_from_transactions(MarketData& market, int window = 4);

// Weekly choice observations in (week, advertiser, site) order, replaying
// beliefs and blocking from the transaction history.
std::vector<ChoiceObservation> build_observations(const MarketData& market);

// Pooled clicks/impressions per advertiser-site over the whole window; the
// approximation to the long-run CTR c_as. NaN where never observed.
std::vector<std::vector<double>> observed_ctr_table(const MarketData& market);

void write_transactions_csv(const std::string& path, const MarketData& market,
                            const std::vector<std::string>& comments = {});
void write_sites_csv(const std::string& path, const MarketData& market,
                     const std::vector<std::string>& comments = {});
void write_menus_csv(const std::string& path, const MarketData& market,
                     const std::vector<std::string>& comments = {});

}  // namespace adlearn
