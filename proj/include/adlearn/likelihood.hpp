#pragma once

// Interval-censored choice likelihood. Each observed weekly choice pins the
// idiosyncratic shock epsilon into an interval: the advertiser preferred the
// chosen duration to the adjacent shorter and longer alternatives. The
// observation likelihood integrates the N(0, sigma^2) density over that
// interval; bounds at the menu edges are +-infinity.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "adlearn/model.hpp"
#include "adlearn/stats.hpp"
#include "adlearn/theta.hpp"

namespace adlearn {

struct ChoiceObservation {
  int advertiser = 0;
  int site = 0;
  int week = 0;
  int chosen_days = 0;  // 0 = no purchase
  Menu menu;
  BeliefState belief;  // counts from ads completed before this week
  int tau = 0;         // tenure bucket at decision time
  int month = 0;       // calendar month index of the week
};

struct EpsilonBounds {
  double lower = -kInf;  // -inf iff chosen_days == 0
  double upper = kInf;   // +inf iff no longer option exists
};

// Per-observation slice of theta.
struct ThetaSlice {
  double gamma = 0.0;
  double zeta = 0.0;
  double xi = 0.0;
  double eta = 0.0;
  double phi_tau = 0.0;
  double psi_m = 0.0;
  double kappa = 1.0;
};

EpsilonBounds compute_bounds(const ChoiceObservation& obs, const ThetaSlice& slice,
                             double traffic);

// Counts observations whose interval probability had to be floored (empty or
// underflowed interval). Surfaced as a sampler diagnostic.
struct FloorDiag {
  long long hits = 0;
  double log_floor = std::log(1e-300);
};

double obs_log_prob(const EpsilonBounds& bounds, double sigma, FloorDiag* diag = nullptr);

// Ordered (sequential) sum of obs_log_prob over the dataset. Deterministic
// reference path; the reduction order is the storage order.
double dataset_log_likelihood(std::span<const ChoiceObservation> observations,
                              const ThetaDraw& theta, std::span<const double> site_traffic,
                              double kappa = 1.0, FloorDiag* diag = nullptr);

// Precomputed dataset for repeated likelihood/gradient evaluation inside the
// sampler. Gradients are accumulated in constrained space using ParamLayout
// slots; the g-slot of an advertiser holds d/d(gamma_a).
class PreparedData {
 public:
  PreparedData(std::vector<ChoiceObservation> observations, std::vector<double> site_traffic,
               ParamLayout layout, double kappa = 1.0, bool deduplicate = false);

  double log_likelihood(const ThetaDraw& theta, FloorDiag* diag = nullptr) const;

  // Returns the log-likelihood and adds its constrained-space gradient into
  // grad (which must be zero-initialized by the caller and have layout.dim()
  // entries).
  double log_likelihood_grad(const ThetaDraw& theta, std::span<double> grad,
                             FloorDiag* diag = nullptr) const;

  // Per-observation log-probabilities in original observation order
  // (independent of deduplication).
  std::vector<double> pointwise(const ThetaDraw& theta, FloorDiag* diag = nullptr) const;

  const ParamLayout& layout() const { return layout_; }
  std::size_t n_observations() const { return observations_.size(); }
  const std::vector<ChoiceObservation>& observations() const { return observations_; }
  double kappa() const { return kappa_; }

 private:
  struct Prepared {
    int a, s, tau, month;
    double n_impressions;
    double log_num;  // log(kappa + n^C)
    bool has_lower, has_upper;
    double log_gap_lo, log_gap_hi;  // log price gaps (dollars)
    double tx_chosen, tx_down, tx_up;
    double weight;
  };

  Prepared prepare_one(const ChoiceObservation& obs) const;
  double eval(const ThetaDraw& theta, std::span<double> grad, bool want_grad,
              std::vector<double>* pointwise, FloorDiag* diag) const;

  std::vector<ChoiceObservation> observations_;
  std::vector<double> traffic_;
  ParamLayout layout_;
  double kappa_;
  std::vector<Prepared> prepared_;     // possibly deduplicated, with weights
  std::vector<Prepared> original_;     // one entry per observation, in order
};

// Matrix of obs_log_prob values, entry (d, i) = draw d, observation i.
std::vector<std::vector<double>> pointwise_loglik_matrix(const PreparedData& data,
                                                         std::span<const ThetaDraw> draws);

void write_pointwise_loglik_csv(const std::string& path,
                                const std::vector<std::vector<double>>& matrix,
                                const std::vector<std::string>& comment_lines = {});

}  // namespace adlearn
