#include "doctest.h"

#include <cmath>

#include "adlearn/pooling.hpp"
#include "adlearn/rng.hpp"

using namespace adlearn;

TEST_CASE("tf-idf weights") {
  TagCorpus corpus;
  corpus.tags_by_advertiser = {
      {{"shared", 2}, {"alpha", 3}},
      {{"shared", 1}, {"beta", 1}},
  };
  const TfidfMatrix tfidf = build_tfidf(corpus);
  REQUIRE(tfidf.advertisers.size() == 2);
  const auto col = [&](const std::string& tag) {
    for (std::size_t t = 0; t < tfidf.vocabulary.size(); ++t)
      if (tfidf.vocabulary[t] == tag) return t;
    REQUIRE(false);
    return std::size_t{0};
  };
  // A tag present in every advertiser has zero weight for everyone.
  CHECK(tfidf.weights[0][col("shared")] == 0.0);
  CHECK(tfidf.weights[1][col("shared")] == 0.0);
  // Count 3 in one of two advertisers: 3 ln 2.
  CHECK(tfidf.weights[0][col("alpha")] ==
        doctest::Approx(2.0794415416798357).epsilon(1e-14));
  CHECK(tfidf.weights[1][col("alpha")] == 0.0);
}

TEST_CASE("tf-idf exclusions and errors") {
  TagCorpus corpus;
  corpus.tags_by_advertiser = {{{"a", 1}}, {}, {{"b", 2}}};
  const TfidfMatrix tfidf = build_tfidf(corpus);
  CHECK(tfidf.advertisers == std::vector<int>{0, 2});
  CHECK(tfidf.excluded == std::vector<int>{1});

  TagCorpus tiny;
  tiny.tags_by_advertiser = {{{"a", 1}}};
  CHECK_THROWS_AS(build_tfidf(tiny), std::domain_error);
  TagCorpus bad;
  bad.tags_by_advertiser = {{{"", 1}}, {{"x", 1}}};
  CHECK_THROWS_AS(build_tfidf(bad), std::domain_error);
}

TEST_CASE("cosine similarity reference values") {
  TfidfMatrix tfidf;
  tfidf.advertisers = {0, 1, 2, 3};
  tfidf.vocabulary = {"t0", "t1", "t2"};
  tfidf.weights = {
      {1.0, 1.0, 0.0},
      {1.0, 0.0, 0.0},
      {0.0, 0.0, 2.0},
      {2.0, 2.0, 0.0},
  };
  const SimilarityMatrix sim = cosine_matrix(tfidf);
  CHECK(*sim.similarity(0, 1) == doctest::Approx(0.7071067811865475).epsilon(1e-14));
  CHECK(*sim.similarity(0, 2) == 0.0);                    // orthogonal
  CHECK(*sim.similarity(0, 3) == doctest::Approx(1.0));   // identical direction
  CHECK(*sim.similarity(0, 0) == 1.0);
}

TEST_CASE("zero-norm rows are excluded with a record") {
  // Both advertisers share every tag, so a third distinct advertiser makes
  // the shared tags still weighted; craft a corpus where one advertiser's
  // tags all have df == N.
  TagCorpus corpus;
  corpus.tags_by_advertiser = {
      {{"common", 1}},
      {{"common", 2}, {"rare", 1}},
  };
  const TfidfMatrix tfidf = build_tfidf(corpus);
  const SimilarityMatrix sim = cosine_matrix(tfidf);
  // Advertiser 0's only tag appears everywhere -> zero norm -> excluded.
  CHECK(sim.excluded == std::vector<int>{0});
  CHECK(sim.advertisers == std::vector<int>{1});
  CHECK(!sim.similarity(0, 1).has_value());
}

TEST_CASE("similarity matrix invariants over random corpora") {
  for (int rep = 0; rep < 100; ++rep) {
    KeyedRng rng{777u, static_cast<std::uint64_t>(rep)};
    TagCorpus corpus;
    const int n = 3 + static_cast<int>(rng.next_below(8));
    corpus.tags_by_advertiser.resize(n);
    for (int a = 0; a < n; ++a) {
      const int k = 1 + static_cast<int>(rng.next_below(6));
      for (int t = 0; t < k; ++t)
        corpus.tags_by_advertiser[a]["tag" + std::to_string(rng.next_below(12))] +=
            1 + static_cast<int>(rng.next_below(3));
    }
    const SimilarityMatrix sim = cosine_matrix(build_tfidf(corpus));
    const std::size_t m = sim.advertisers.size();
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(sim.r[i][i] == 1.0);
      for (std::size_t j = 0; j < m; ++j) {
        CHECK(sim.r[i][j] == doctest::Approx(sim.r[j][i]).epsilon(1e-12));
        CHECK(sim.r[i][j] >= 0.0);
        CHECK(sim.r[i][j] <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("permuting advertisers permutes but does not change similarities") {
  TagCorpus corpus;
  corpus.tags_by_advertiser = {
      {{"a", 1}, {"b", 2}}, {{"b", 1}, {"c", 3}}, {{"a", 2}, {"c", 1}}};
  const SimilarityMatrix sim = cosine_matrix(build_tfidf(corpus));
  TagCorpus permuted;
  permuted.tags_by_advertiser = {corpus.tags_by_advertiser[2], corpus.tags_by_advertiser[0],
                                 corpus.tags_by_advertiser[1]};
  const SimilarityMatrix sim2 = cosine_matrix(build_tfidf(permuted));
  // Pair (0,1) in the original is pair (1,2) after the cyclic shift.
  CHECK(*sim.similarity(0, 1) == doctest::Approx(*sim2.similarity(1, 2)).epsilon(1e-14));
  CHECK(*sim.similarity(0, 2) == doctest::Approx(*sim2.similarity(1, 0)).epsilon(1e-14));
}

namespace {

SimilarityMatrix uniform_similarity(int n, double value) {
  SimilarityMatrix sim;
  for (int i = 0; i < n; ++i) sim.advertisers.push_back(i);
  sim.r.assign(n, std::vector<double>(n, value));
  for (int i = 0; i < n; ++i) sim.r[i][i] = 1.0;
  return sim;
}

}  // namespace

TEST_CASE("ctr prediction") {
  KnownCtrTable table;
  table.by_site.resize(1);
  table.by_site[0] = {{1, 0.001}, {2, 0.003}};

  // Equal similarities average the peers.
  const auto equal = predict_ctr(uniform_similarity(3, 0.5), table, 0, 0);
  CHECK(equal.valid);
  CHECK(equal.ctr == doctest::Approx(0.002).epsilon(1e-14));
  CHECK(equal.peer_count == 2);

  // Single peer: that peer's CTR exactly.
  KnownCtrTable single;
  single.by_site.resize(1);
  single.by_site[0] = {{1, 0.0042}};
  const auto one = predict_ctr(uniform_similarity(2, 0.3), single, 0, 0);
  CHECK(one.valid);
  CHECK(one.ctr == doctest::Approx(0.0042).epsilon(1e-14));

  // Weighted average with weights 0.9 / 0.1.
  SimilarityMatrix weighted = uniform_similarity(3, 0.0);
  weighted.r[0][1] = weighted.r[1][0] = 0.9;
  weighted.r[0][2] = weighted.r[2][0] = 0.1;
  const auto mix = predict_ctr(weighted, table, 0, 0);
  CHECK(mix.ctr == doctest::Approx(0.0012).epsilon(1e-14));

  // The advertiser never contributes to its own prediction.
  KnownCtrTable with_self;
  with_self.by_site.resize(1);
  with_self.by_site[0] = {{0, 0.9}, {1, 0.001}};
  const auto self_excluded = predict_ctr(uniform_similarity(2, 0.4), with_self, 0, 0);
  CHECK(self_excluded.ctr == doctest::Approx(0.001).epsilon(1e-14));

  // No peers, or all-zero weights: explicit no-prediction.
  CHECK(!predict_ctr(uniform_similarity(2, 0.4), KnownCtrTable{{{}}}, 0, 0).valid);
  CHECK(!predict_ctr(uniform_similarity(3, 0.0), table, 0, 0).valid);
}

TEST_CASE("prediction is a convex combination of peer ctrs") {
  KeyedRng rng{31337u};
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 3 + static_cast<int>(rng.next_below(6));
    SimilarityMatrix sim = uniform_similarity(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) sim.r[i][j] = sim.r[j][i] = rng.next_u01();
    KnownCtrTable table;
    table.by_site.resize(1);
    double lo = 1.0, hi = 0.0;
    for (int j = 1; j < n; ++j) {
      const double ctr = 0.005 * rng.next_u01();
      table.by_site[0].push_back({j, ctr});
      lo = std::min(lo, ctr);
      hi = std::max(hi, ctr);
    }
    const auto pred = predict_ctr(sim, table, 0, 0);
    REQUIRE(pred.valid);
    CHECK(pred.ctr >= lo - 1e-15);
    CHECK(pred.ctr <= hi + 1e-15);
  }
}

TEST_CASE("calibration bins") {
  // Perfectly calibrated data: observed == predicted + noise.
  KeyedRng rng{2222u};
  std::vector<double> predicted, observed;
  for (int i = 0; i < 2000; ++i) {
    const double p = 0.001 + 0.004 * rng.next_u01();
    predicted.push_back(p);
    observed.push_back(p + 0.0004 * rng.next_normal());
  }
  const auto bins = calibration_bins(predicted, observed, 20);
  REQUIRE(bins.size() == 20);
  int inside = 0;
  for (const auto& bin : bins) {
    CHECK(bin.count >= 90);  // roughly equal sizes
    if (bin.mean_predicted >= bin.ci_lo && bin.mean_predicted <= bin.ci_hi) ++inside;
  }
  CHECK(inside >= 18);  // the 45-degree line lies inside nearly every CI
  CHECK(calibration_slope(bins) == doctest::Approx(1.0).scale(0.0).epsilon(0.1));

  // Single bin: global means.
  const auto one = calibration_bins(predicted, observed, 1);
  REQUIRE(one.size() == 1);
  double mp = 0.0;
  for (double p : predicted) mp += p;
  // The top percentile is trimmed, so compare against the trimmed mean.
  CHECK(one[0].count == static_cast<int>(std::ceil(0.99 * predicted.size())));

  // Constant predictions collapse to the global observed mean per bin.
  std::vector<double> flat(predicted.size(), 0.002);
  const auto flat_bins = calibration_bins(flat, observed, 4);
  for (const auto& bin : flat_bins)
    CHECK(bin.mean_predicted == doctest::Approx(0.002).epsilon(1e-12));

  CHECK_THROWS_AS(calibration_bins({0.1, 0.2}, {0.1, 0.2}, 3), std::domain_error);
  CHECK_THROWS_AS(calibration_bins({0.1}, {0.1, 0.2}, 1), std::invalid_argument);
}
