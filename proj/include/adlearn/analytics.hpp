#pragma once

// Descriptive dataset diagnostics: Jaccard persistence of publisher sets,
// realized cost-per-click split by retention, active-site time series and
// the sequential ANOVA decomposition of long-run CTRs.

#include <cstdint>
#include <set>
#include <vector>

#include "adlearn/dataset.hpp"

namespace adlearn {

// |A intersect B| / |A union B|; 1 when both sets are empty (flagged).
double jaccard(const std::set<int>& a, const std::set<int>& b, bool* both_empty = nullptr);

struct PersistencePoint {
  int period = 0;         // two-week period index, 0-based from joining
  double mean_jaccard = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int advertisers = 0;    // contributing advertisers
};

// Per period: Jaccard between the publisher set of that period and the most
// recent earlier period with a purchase, averaged across advertisers; timing
// is normalized to each advertiser's joining week.
std::vector<PersistencePoint> persistence_series(const MarketData& market,
                                                 int period_weeks = 2,
                                                 std::uint64_t bootstrap_seed = 29,
                                                 int bootstrap_reps = 1000);

struct CpcGroup {
  std::vector<double> cpc;       // finite values, one per advertiser-site pair
  int zero_click_pairs = 0;      // infinite CPC, excluded from the median
  double median() const;
};

struct CpcByRetention {
  CpcGroup continued;  // advertiser placed 2+ ads at the site
  CpcGroup abandoned;  // advertiser never returned after the first ad
};

CpcByRetention cpc_by_retention(const MarketData& market);

struct ActiveSitesPoint {
  int day = 0;            // 1-based day since the advertiser's first ad
  double mean_sites = 0.0;  // among advertisers with at least one running ad
  int active_advertisers = 0;
};

// Reported from day `min_day` onward (the first week is truncated to match
// the cohort normalization).
std::vector<ActiveSitesPoint> active_sites_series(const MarketData& market, int min_day = 7);

struct CtrRecord {
  int advertiser = 0;
  int site = 0;
  double ctr = 0.0;  // long-run CTR in [0,1]
};

struct AnovaTerm {
  std::string name;
  int df = 0;
  double sum_squares = 0.0;
  double percent = 0.0;
};

struct AnovaResult {
  std::vector<AnovaTerm> terms;  // advertiser, publisher, residual
  double total_ss = 0.0;
};

// Sequential (Type I) two-way ANOVA: advertiser entered first, publisher
// second, residual last. Percentages sum to 100.
AnovaResult variance_decomposition(const std::vector<CtrRecord>& records);

}  // namespace adlearn
