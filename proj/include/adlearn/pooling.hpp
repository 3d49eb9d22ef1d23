#pragma once

// Cold-start CTR prediction from ad-image tags: TF-IDF over advertiser tag
// multisets, cosine similarity between advertisers, similarity-weighted
// averages of peer CTRs per site, and calibration binning.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adlearn {

// advertiser index -> tag -> count (aggregated over the advertiser's images).
struct TagCorpus {
  std::vector<std::map<std::string, int>> tags_by_advertiser;

  int n_advertisers() const { return static_cast<int>(tags_by_advertiser.size()); }
};

struct TfidfMatrix {
  std::vector<int> advertisers;         // included advertiser indices
  std::vector<std::string> vocabulary;  // tag order of the columns
  std::vector<std::vector<double>> weights;  // rows parallel advertisers
  std::vector<int> excluded;            // advertisers with no tags
};

struct SimilarityMatrix {
  std::vector<int> advertisers;  // indices with defined rows
  std::vector<std::vector<double>> r;  // square, symmetric, unit diagonal
  std::vector<int> excluded;     // zero-norm rows dropped during construction

  std::optional<double> similarity(int advertiser_a, int advertiser_b) const;
};

// Per site: the advertisers with an approximated long-run c_as and those
// values (pooled clicks/impressions over the data window).
struct KnownCtrTable {
  // [site] -> list of (advertiser, ctr)
  std::vector<std::vector<std::pair<int, double>>> by_site;
};

// weight(a, t) = count of t in a's tags * ln(N / df(t)). Advertisers without
// tags are excluded and recorded. Requires at least 2 tagged advertisers.
TfidfMatrix build_tfidf(const TagCorpus& corpus);

SimilarityMatrix cosine_matrix(const TfidfMatrix& tfidf);

struct CtrPrediction {
  double ctr = 0.0;
  int peer_count = 0;
  bool valid = false;  // false: empty peer set or all-zero similarity weights
};

// Eq.-style similarity-weighted average over peers at the site; the
// advertiser is always excluded from its own prediction.
CtrPrediction predict_ctr(const SimilarityMatrix& similarity, const KnownCtrTable& table,
                          int advertiser, int site);

struct CalibrationBin {
  double mean_predicted = 0.0;
  double mean_observed = 0.0;
  double ci_lo = 0.0;  // bootstrap 95% CI for the observed mean
  double ci_hi = 0.0;
  int count = 0;
};

// Equal-count bins by predicted value, truncated above the 99th percentile.
std::vector<CalibrationBin> calibration_bins(const std::vector<double>& predicted,
                                             const std::vector<double>& observed, int bins,
                                             std::uint64_t bootstrap_seed = 23,
                                             int bootstrap_reps = 1000);

// OLS slope of bin observed means on bin predicted means.
double calibration_slope(const std::vector<CalibrationBin>& bins);

}  // namespace adlearn
