#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <vector>

#include "adlearn/csv.hpp"
#include "adlearn/inference.hpp"
#include "adlearn/likelihood.hpp"
#include "adlearn/model.hpp"
#include "adlearn/rng.hpp"
#include "adlearn/stats.hpp"

using namespace adlearn;

namespace {

Menu two_option_menu() {
  return Menu({{7, dollars_to_cents(100.0)}, {14, dollars_to_cents(180.0)}});
}

ThetaSlice slice_with_mu(double mu, double gamma, double zeta) {
  // Empty beliefs make the ratio 1, so xi carries the whole of log(mu).
  return ThetaSlice{gamma, zeta, std::log(mu), 0.0, 0.0, 0.0, 1.0};
}

}  // namespace

TEST_CASE("bounds at the menu edges") {
  ChoiceObservation obs;
  obs.menu = two_option_menu();
  obs.chosen_days = 0;
  auto bounds = compute_bounds(obs, slice_with_mu(0.05, 0.01, 0.01), 10000.0);
  CHECK(bounds.lower == -kInf);
  CHECK(std::isfinite(bounds.upper));

  obs.chosen_days = 14;  // longest option
  bounds = compute_bounds(obs, slice_with_mu(0.05, 0.01, 0.01), 10000.0);
  CHECK(bounds.upper == kInf);
  CHECK(std::isfinite(bounds.lower));

  ChoiceObservation empty;
  empty.menu = Menu();
  empty.chosen_days = 0;
  bounds = compute_bounds(empty, slice_with_mu(0.05, 0.01, 0.01), 10000.0);
  CHECK(bounds.lower == -kInf);
  CHECK(bounds.upper == kInf);
}

TEST_CASE("lower bound reference value and brute-force switch point") {
  // Menu {7: $100, 14: $180}, chosen 14, t = 10000, zeta = 0.01, mu = 0.05:
  // lb = ln 80 - ln(0.05 * 100 * ln(1401/701)).
  ChoiceObservation obs;
  obs.menu = two_option_menu();
  obs.chosen_days = 14;
  const auto bounds = compute_bounds(obs, slice_with_mu(0.05, 0.01, 0.01), 10000.0);
  const double expected = std::log(80.0) - std::log(0.05 * 100.0 * std::log(1401.0 / 701.0));
  CHECK(expected == doctest::Approx(3.1401315665907017).epsilon(1e-14));
  CHECK(bounds.lower == doctest::Approx(expected).epsilon(1e-12));

  // The bound is exactly where preference switches between the two options.
  auto prefers_14 = [&](double eps) {
    const double v14 = expected_payoff(0.05, eps, 0.01, 10000.0, 14, 180.0);
    const double v7 = expected_payoff(0.05, eps, 0.01, 10000.0, 7, 100.0);
    return v14 > v7;
  };
  CHECK(!prefers_14(bounds.lower - 1e-9));
  CHECK(prefers_14(bounds.lower + 1e-9));
}

TEST_CASE("containment: the optimal choice satisfies its own bounds") {
  KeyedRng rng{314u};
  for (int rep = 0; rep < 400; ++rep) {
    const double traffic = 2000.0 + 150000.0 * rng.next_u01();
    std::vector<SubscriptionOption> options;
    Cents price = dollars_to_cents(20.0 + 200.0 * rng.next_u01());
    int days = 0;
    const int n_options = 2 + static_cast<int>(rng.next_below(3));
    for (int i = 0; i < n_options; ++i) {
      days += 3 + static_cast<int>(rng.next_below(12));
      price += dollars_to_cents(10.0 + 150.0 * rng.next_u01());
      options.push_back({days, price});
    }
    ChoiceObservation obs;
    obs.menu = Menu(options);
    obs.belief = BeliefState{static_cast<std::int64_t>(rng.next_below(1000000)), 0};
    obs.belief.clicks = static_cast<std::int64_t>(
        rng.next_below(static_cast<std::uint64_t>(obs.belief.impressions / 100 + 1)));
    ThetaSlice slice;
    slice.gamma = 0.0005 * std::exp(0.5 * rng.next_normal());
    slice.zeta = 0.01 + std::exp(rng.next_normal() - 4.0);
    slice.xi = rng.next_normal();
    slice.eta = rng.next_normal();
    slice.phi_tau = 0.3 * rng.next_normal();
    slice.psi_m = 0.3 * rng.next_normal();
    const double ratio = belief_ratio(obs.belief, slice.gamma);
    const double mu =
        deterministic_match(ratio, slice.xi, slice.eta, slice.phi_tau, slice.psi_m);
    const double eps = 1.5 * rng.next_normal();
    obs.chosen_days = optimal_choice(obs.menu, mu, eps, slice.zeta, traffic);
    const auto bounds = compute_bounds(obs, slice, traffic);
    CHECK(bounds.lower < eps);
    CHECK(eps < bounds.upper);
  }
}

TEST_CASE("observation log probability") {
  CHECK(obs_log_prob({-kInf, 0.0}, 1.0) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(obs_log_prob({-1.0, 1.0}, 1.0) ==
        doctest::Approx(std::log(0.6826894921370859)).epsilon(1e-13));
  CHECK(obs_log_prob({-2.0, 2.0}, 2.0) ==
        doctest::Approx(std::log(0.6826894921370859)).epsilon(1e-13));
  FloorDiag diag;
  CHECK(obs_log_prob({1.0, 1.0}, 1.0, &diag) == doctest::Approx(std::log(1e-300)));
  CHECK(diag.hits == 1);
  CHECK(obs_log_prob({3.0, 2.0}, 1.0, &diag) == doctest::Approx(std::log(1e-300)));
  CHECK(diag.hits == 2);
  // exp(log prob) in (0, 1]; wider interval, larger probability.
  const double narrow = obs_log_prob({-0.5, 0.5}, 1.0);
  const double wide = obs_log_prob({-1.5, 1.5}, 1.0);
  CHECK(narrow < wide);
  CHECK(wide < 0.0);
  CHECK(obs_log_prob({-kInf, kInf}, 1.0) == 0.0);
}

namespace {

// Small synthetic estimation problem with choices simulated from the model.
struct TestProblem {
  ParamLayout layout;
  ThetaDraw theta;
  std::vector<double> traffic;
  std::vector<ChoiceObservation> observations;
};

TestProblem make_problem(int n_obs, std::uint64_t seed, int advertisers = 6, int sites = 4,
                         int months = 3) {
  TestProblem problem;
  problem.layout = ParamLayout{advertisers, sites, months};
  KeyedRng rng{seed, 0x4c494bULL};

  ThetaDraw& theta = problem.theta;
  theta.gamma_bar = 0.001 * std::exp(0.3 * rng.next_normal());
  theta.zeta_bar = std::exp(rng.next_normal());
  theta.sigma = 0.8 * std::exp(0.2 * rng.next_normal());
  for (int a = 0; a < advertisers; ++a) {
    theta.g.push_back(std::exp(0.5 * rng.next_normal()));
    theta.zeta.push_back(kZetaShift + std::exp(rng.next_normal() - 3.0));
    theta.xi.push_back(0.5 * rng.next_normal());
  }
  for (int s = 0; s < sites; ++s) {
    theta.eta.push_back(0.5 * rng.next_normal());
    problem.traffic.push_back(20000.0 * std::exp(rng.next_u01() * 2.0));
  }
  for (int k = 0; k < kTenureBuckets; ++k) theta.phi.push_back(0.3 * rng.next_normal());
  for (int m = 0; m < months; ++m) theta.psi.push_back(0.3 * rng.next_normal());

  for (int i = 0; i < n_obs; ++i) {
    ChoiceObservation obs;
    obs.advertiser = static_cast<int>(rng.next_below(advertisers));
    obs.site = static_cast<int>(rng.next_below(sites));
    obs.week = 1 + static_cast<int>(rng.next_below(20));
    obs.tau = static_cast<int>(rng.next_below(kTenureBuckets));
    obs.month = static_cast<int>(rng.next_below(months));
    const double base = 100.0 * problem.traffic[obs.site] / 20000.0;
    obs.menu = Menu({{7, dollars_to_cents(base)},
                     {14, dollars_to_cents(base * 1.8)},
                     {30, dollars_to_cents(base * 3.5)}});
    if (rng.next_u01() < 0.5) {
      const std::int64_t impressions = static_cast<std::int64_t>(rng.next_below(2000000));
      obs.belief.impressions = impressions;
      obs.belief.clicks = static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(impressions / 500 + 1)));
    }
    const double gamma = theta.gamma(obs.advertiser);
    const double mu = deterministic_match(
        belief_ratio(obs.belief, gamma), theta.xi[obs.advertiser], theta.eta[obs.site],
        theta.phi[obs.tau], theta.psi[obs.month]);
    const double eps = theta.sigma * rng.next_normal();
    obs.chosen_days =
        optimal_choice(obs.menu, mu, eps, theta.zeta[obs.advertiser], problem.traffic[obs.site]);
    problem.observations.push_back(std::move(obs));
  }
  return problem;
}

}  // namespace

TEST_CASE("dataset log likelihood: ordered reduction reference") {
  const auto problem = make_problem(1000, 99u);
  CHECK(dataset_log_likelihood({}, problem.theta, problem.traffic) == 0.0);

  // Single observation equals its own obs_log_prob.
  const auto& first = problem.observations.front();
  const ThetaSlice slice{problem.theta.gamma(first.advertiser),
                         problem.theta.zeta[first.advertiser],
                         problem.theta.xi[first.advertiser],
                         problem.theta.eta[first.site],
                         problem.theta.phi[first.tau],
                         problem.theta.psi[first.month],
                         1.0};
  const double single = obs_log_prob(compute_bounds(first, slice, problem.traffic[first.site]),
                                     problem.theta.sigma);
  CHECK(dataset_log_likelihood({&first, 1}, problem.theta, problem.traffic) == single);

  // Bit-for-bit match with a naive sequential loop.
  double naive = 0.0;
  for (const auto& obs : problem.observations) {
    const ThetaSlice s{problem.theta.gamma(obs.advertiser),
                       problem.theta.zeta[obs.advertiser],
                       problem.theta.xi[obs.advertiser],
                       problem.theta.eta[obs.site],
                       problem.theta.phi[obs.tau],
                       problem.theta.psi[obs.month],
                       1.0};
    naive += obs_log_prob(compute_bounds(obs, s, problem.traffic[obs.site]),
                          problem.theta.sigma);
  }
  const double production =
      dataset_log_likelihood(problem.observations, problem.theta, problem.traffic);
  CHECK(production == naive);  // bitwise
  CHECK(std::isfinite(production));
}

TEST_CASE("prepared data agrees with the reference path") {
  const auto problem = make_problem(600, 1234u);
  const double reference =
      dataset_log_likelihood(problem.observations, problem.theta, problem.traffic);
  const PreparedData plain(problem.observations, problem.traffic, problem.layout);
  const PreparedData dedup(problem.observations, problem.traffic, problem.layout, 1.0, true);
  CHECK(plain.log_likelihood(problem.theta) ==
        doctest::Approx(reference).epsilon(1e-12));
  CHECK(dedup.log_likelihood(problem.theta) ==
        doctest::Approx(reference).epsilon(1e-9));
}

TEST_CASE("gradient matches central finite differences") {
  const auto problem = make_problem(200, 777u);
  const PreparedData data(problem.observations, problem.traffic, problem.layout);
  const Posterior posterior(&data);
  const int dim = problem.layout.dim();
  const auto u_true = theta_to_unconstrained(problem.layout, problem.theta);

  KeyedRng rng{4242u};
  int tested_points = 0;
  for (int point = 0; point < 20; ++point) {
    std::vector<double> u = u_true;
    for (auto& v : u) v += 0.1 * rng.next_normal();
    FloorDiag diag;
    std::vector<double> grad(dim, 0.0);
    const double value = posterior.value_and_grad(u, grad, &diag);
    if (!std::isfinite(value) || diag.hits > 0) continue;  // keep differentiable points
    ++tested_points;
    double max_err = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double h = 1e-5;
      std::vector<double> up = u, down = u;
      up[i] += h;
      down[i] -= h;
      const double fd = (posterior.value(up) - posterior.value(down)) / (2.0 * h);
      const double err = std::fabs(fd - grad[i]) / std::max(1.0, std::fabs(grad[i]));
      max_err = std::max(max_err, err);
    }
    CHECK(max_err <= 1e-5);
  }
  CHECK(tested_points >= 15);
}

TEST_CASE("free-bound observations contribute nothing") {
  auto problem = make_problem(50, 31u);
  const PreparedData before(problem.observations, problem.traffic, problem.layout);
  const double ll_before = before.log_likelihood(problem.theta);
  std::vector<double> grad_before(problem.layout.dim(), 0.0);
  before.log_likelihood_grad(problem.theta, grad_before);

  ChoiceObservation free_obs;
  free_obs.advertiser = 0;
  free_obs.site = 0;
  free_obs.menu = Menu();
  free_obs.chosen_days = 0;
  problem.observations.push_back(free_obs);
  const PreparedData after(problem.observations, problem.traffic, problem.layout);
  const double ll_after = after.log_likelihood(problem.theta);
  std::vector<double> grad_after(problem.layout.dim(), 0.0);
  after.log_likelihood_grad(problem.theta, grad_after);

  CHECK(ll_after == ll_before);
  for (int i = 0; i < problem.layout.dim(); ++i) CHECK(grad_after[i] == grad_before[i]);
}

TEST_CASE("sigma gradient sign against finite differences") {
  // One-sided interval above zero: widening sigma raises the probability.
  auto check_sign = [](const EpsilonBounds& bounds, double expected_sign) {
    const double sigma = 0.9;
    const double h = 1e-6;
    const double fd =
        (obs_log_prob(bounds, sigma + h) - obs_log_prob(bounds, sigma - h)) / (2.0 * h);
    CHECK(fd * expected_sign > 0.0);
  };
  check_sign({2.0, kInf}, +1.0);
  check_sign({-1.0, 1.0}, -1.0);  // mass leaks out of a bounded interval
}

TEST_CASE("pointwise matrix: row sums and csv round trip") {
  const auto problem = make_problem(120, 55u);
  const PreparedData data(problem.observations, problem.traffic, problem.layout);

  std::vector<ThetaDraw> draws;
  draws.push_back(problem.theta);
  ThetaDraw jittered = problem.theta;
  for (auto& v : jittered.xi) v += 0.2;
  draws.push_back(jittered);

  const auto matrix = pointwise_loglik_matrix(data, draws);
  REQUIRE(matrix.size() == 2);
  REQUIRE(matrix[0].size() == problem.observations.size());
  for (std::size_t d = 0; d < draws.size(); ++d) {
    double row_sum = 0.0;
    for (double v : matrix[d]) row_sum += v;
    const double reference =
        dataset_log_likelihood(problem.observations, draws[d], problem.traffic);
    CHECK(row_sum ==
          doctest::Approx(reference).epsilon(1e-12));
  }

  // 1x1 case.
  const PreparedData one({problem.observations[0]}, problem.traffic, problem.layout);
  const auto tiny = pointwise_loglik_matrix(one, {&draws[0], 1});
  CHECK(tiny.size() == 1);
  CHECK(tiny[0].size() == 1);

  const std::string path = "pointwise_test.csv";
  write_pointwise_loglik_csv(path, matrix, {"test export"});
  const CsvTable table = read_csv(path);
  REQUIRE(table.columns == std::vector<std::string>{"draw", "obs_index", "loglik"});
  REQUIRE(table.rows.size() == 2 * problem.observations.size());
  for (const auto& row : table.rows) {
    const int d = static_cast<int>(parse_int(row[0], "draw"));
    const int i = static_cast<int>(parse_int(row[1], "obs"));
    CHECK(parse_double(row[2], "loglik") == matrix[d][i]);  // lossless at 17 digits
  }
  std::remove(path.c_str());
}

TEST_CASE("monte carlo calibration of interval probabilities") {
  // Menus screened so that no option is dominated: adjacent switch points
  // strictly increase, making adjacent bounds exact choice regions.
  KeyedRng rng{808u};
  int cases_done = 0;
  while (cases_done < 5) {
    const double traffic = 5000.0 + 100000.0 * rng.next_u01();
    const double zeta = 0.01 + std::exp(rng.next_normal() - 4.0);
    const double mu = std::exp(rng.next_normal() - 1.0);
    const double sigma = 0.5 + rng.next_u01();
    Menu menu({{7, dollars_to_cents(50.0 + 100.0 * rng.next_u01())},
               {14, dollars_to_cents(200.0 + 100.0 * rng.next_u01())},
               {30, dollars_to_cents(450.0 + 150.0 * rng.next_u01())}});
    ThetaSlice slice;
    slice.gamma = 0.001;
    slice.zeta = zeta;
    slice.xi = std::log(mu);

    // Screen: every option's interval must be non-empty.
    std::vector<double> switches;
    bool screened = true;
    for (std::size_t i = 0; i < menu.size(); ++i) {
      ChoiceObservation obs;
      obs.menu = menu;
      obs.chosen_days = menu[i].days;
      const auto b = compute_bounds(obs, slice, traffic);
      switches.push_back(b.lower);
      if (!switches.empty() && switches.size() > 1 &&
          switches.back() <= switches[switches.size() - 2])
        screened = false;
    }
    if (!screened) continue;
    ++cases_done;

    const int chosen_index = static_cast<int>(rng.next_below(menu.size() + 1)) - 1;
    ChoiceObservation obs;
    obs.menu = menu;
    obs.chosen_days = chosen_index < 0 ? 0 : menu[chosen_index].days;
    const auto bounds = compute_bounds(obs, slice, traffic);
    const double p = std::exp(obs_log_prob(bounds, sigma));

    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const double eps = sigma * rng.next_normal();
      if (optimal_choice(menu, mu, eps, zeta, traffic) == obs.chosen_days) ++hits;
    }
    const double freq = static_cast<double>(hits) / n;
    const double tol = 3.0 * std::sqrt(p * (1.0 - p) / n) + 1e-3;
    CHECK(std::fabs(p - freq) <= tol);
  }
}
