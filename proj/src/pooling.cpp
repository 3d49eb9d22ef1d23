#include "adlearn/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "adlearn/rng.hpp"

namespace adlearn {

std::optional<double> SimilarityMatrix::similarity(int advertiser_a, int advertiser_b) const {
  int ia = -1, ib = -1;
  for (std::size_t i = 0; i < advertisers.size(); ++i) {
    if (advertisers[i] == advertiser_a) ia = static_cast<int>(i);
    if (advertisers[i] == advertiser_b) ib = static_cast<int>(i);
  }
  if (ia < 0 || ib < 0) return std::nullopt;
  return r[ia][ib];
}

TfidfMatrix build_tfidf(const TagCorpus& corpus) {
  TfidfMatrix out;
  for (int a = 0; a < corpus.n_advertisers(); ++a) {
    if (corpus.tags_by_advertiser[a].empty())
      out.excluded.push_back(a);
    else
      out.advertisers.push_back(a);
  }
  const int n = static_cast<int>(out.advertisers.size());
  if (n < 2) throw std::domain_error("build_tfidf: need at least 2 tagged advertisers");

  // Document frequency over included advertisers.
  std::map<std::string, int> df;
  for (int a : out.advertisers)
    for (const auto& [tag, count] : corpus.tags_by_advertiser[a]) {
      if (tag.empty()) throw std::domain_error("build_tfidf: empty tag");
      (void)count;
      ++df[tag];
    }
  for (const auto& [tag, d] : df) out.vocabulary.push_back(tag);

  out.weights.assign(n, std::vector<double>(out.vocabulary.size(), 0.0));
  for (int row = 0; row < n; ++row) {
    const auto& tags = corpus.tags_by_advertiser[out.advertisers[row]];
    for (std::size_t t = 0; t < out.vocabulary.size(); ++t) {
      const auto it = tags.find(out.vocabulary[t]);
      if (it == tags.end()) continue;
      out.weights[row][t] =
          it->second * std::log(static_cast<double>(n) / df[out.vocabulary[t]]);
    }
  }
  return out;
}

SimilarityMatrix cosine_matrix(const TfidfMatrix& tfidf) {
  SimilarityMatrix out;
  out.excluded = tfidf.excluded;
  std::vector<int> kept;
  std::vector<const std::vector<double>*> rows;
  std::vector<double> norms;
  for (std::size_t i = 0; i < tfidf.advertisers.size(); ++i) {
    double ss = 0.0;
    for (double w : tfidf.weights[i]) ss += w * w;
    if (ss > 0.0) {
      kept.push_back(tfidf.advertisers[i]);
      rows.push_back(&tfidf.weights[i]);
      norms.push_back(std::sqrt(ss));
    } else {
      // A tag set whose every tag appears everywhere has zero TF-IDF norm.
      out.excluded.push_back(tfidf.advertisers[i]);
    }
  }
  const int n = static_cast<int>(kept.size());
  out.advertisers = kept;
  out.r.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    out.r[i][i] = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < rows[i]->size(); ++t) dot += (*rows[i])[t] * (*rows[j])[t];
      const double sim = dot / (norms[i] * norms[j]);
      out.r[i][j] = sim;
      out.r[j][i] = sim;
    }
  }
  return out;
}

CtrPrediction predict_ctr(const SimilarityMatrix& similarity, const KnownCtrTable& table,
                          int advertiser, int site) {
  CtrPrediction pred;
  if (site < 0 || site >= static_cast<int>(table.by_site.size())) return pred;
  double num = 0.0, den = 0.0;
  for (const auto& [peer, ctr] : table.by_site[site]) {
    if (peer == advertiser) continue;
    const auto sim = similarity.similarity(advertiser, peer);
    if (!sim) continue;
    num += *sim * ctr;
    den += *sim;
    ++pred.peer_count;
  }
  if (pred.peer_count == 0 || !(den > 0.0)) {
    pred.valid = false;
    return pred;
  }
  pred.ctr = num / den;
  pred.valid = true;
  return pred;
}

std::vector<CalibrationBin> calibration_bins(const std::vector<double>& predicted,
                                             const std::vector<double>& observed, int bins,
                                             std::uint64_t bootstrap_seed, int bootstrap_reps) {
  if (predicted.size() != observed.size())
    throw std::invalid_argument("calibration_bins: length mismatch");
  if (bins < 1 || bins > static_cast<int>(predicted.size()))
    throw std::domain_error("calibration_bins: bins must be in [1, n]");

  // Stable order by (predicted, index); truncate above the 99th percentile.
  std::vector<std::size_t> order(predicted.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predicted[a] != predicted[b] ? predicted[a] < predicted[b] : a < b;
  });
  const std::size_t keep = std::max<std::size_t>(
      bins, static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(order.size()))));
  order.resize(std::min(order.size(), keep));

  const std::size_t n = order.size();
  std::vector<CalibrationBin> out;
  KeyedRng rng{bootstrap_seed, 0x43414cULL};
  for (int b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins;
    const std::size_t hi = (b + 1) * n / bins;
    if (hi <= lo) continue;
    CalibrationBin bin;
    bin.count = static_cast<int>(hi - lo);
    std::vector<double> obs_members;
    for (std::size_t i = lo; i < hi; ++i) {
      bin.mean_predicted += predicted[order[i]];
      bin.mean_observed += observed[order[i]];
      obs_members.push_back(observed[order[i]]);
    }
    bin.mean_predicted /= bin.count;
    bin.mean_observed /= bin.count;
    std::vector<double> means(bootstrap_reps);
    for (int r = 0; r < bootstrap_reps; ++r) {
      double m = 0.0;
      for (int i = 0; i < bin.count; ++i) m += obs_members[rng.next_below(obs_members.size())];
      means[r] = m / bin.count;
    }
    std::sort(means.begin(), means.end());
    bin.ci_lo = means[static_cast<std::size_t>(0.025 * (bootstrap_reps - 1))];
    bin.ci_hi = means[static_cast<std::size_t>(0.975 * (bootstrap_reps - 1))];
    out.push_back(bin);
  }
  return out;
}

double calibration_slope(const std::vector<CalibrationBin>& bins) {
  if (bins.size() < 2) throw std::domain_error("calibration_slope: need at least 2 bins");
  double mx = 0.0, my = 0.0;
  for (const auto& b : bins) {
    mx += b.mean_predicted;
    my += b.mean_observed;
  }
  mx /= bins.size();
  my /= bins.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& b : bins) {
    sxx += (b.mean_predicted - mx) * (b.mean_predicted - mx);
    sxy += (b.mean_predicted - mx) * (b.mean_observed - my);
  }
  if (!(sxx > 0.0)) throw std::domain_error("calibration_slope: degenerate predictions");
  return sxy / sxx;
}

}  // namespace adlearn
