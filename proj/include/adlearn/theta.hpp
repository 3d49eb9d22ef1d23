#pragma once

// The full parameter vector theta and its bijection with an unconstrained
// real vector. Positive quantities live on the log scale; gamma_a is never a
// free coordinate, it is derived from the latent g_a and the hyperparameter
// gamma_bar via gamma_a = g_a / (gamma_bar^-1 + g_a).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "adlearn/model.hpp"

namespace adlearn {

// Lower shift of the satiation-rate prior.
inline constexpr double kZetaShift = 0.01;

struct ThetaDraw {
  std::vector<double> g;     // latent per-advertiser g_a > 0
  std::vector<double> zeta;  // per-advertiser satiation, > kZetaShift
  std::vector<double> xi;    // per-advertiser fixed effect
  std::vector<double> eta;   // per-site fixed effect
  std::vector<double> phi;   // tenure-bucket effects, kTenureBuckets entries
  std::vector<double> psi;   // month effects
  double sigma = 1.0;        // shock standard deviation, > 0
  double zeta_bar = 1.0;     // hyper mean of zeta_a - shift, > 0
  double gamma_bar = 0.001;  // hyper scale of gamma_a, > 0

  int n_advertisers() const { return static_cast<int>(g.size()); }
  int n_sites() const { return static_cast<int>(eta.size()); }
  int n_months() const { return static_cast<int>(psi.size()); }

  double gamma(int a) const { return g[a] / (1.0 / gamma_bar + g[a]); }

  bool valid() const;
};

// Flat indexing of both the unconstrained vector and the constrained-space
// gradient. The g-slot of a constrained gradient holds d/d(gamma_a); the
// transform owns the chain rule from gamma_a back to (g_a, gamma_bar).
struct ParamLayout {
  int advertisers = 0;
  int sites = 0;
  int months = 0;

  int dim() const { return 3 * advertisers + sites + kTenureBuckets + months + 3; }

  int ig(int a) const { return a; }
  int izeta(int a) const { return advertisers + a; }
  int ixi(int a) const { return 2 * advertisers + a; }
  int ieta(int s) const { return 3 * advertisers + s; }
  int iphi(int t) const { return 3 * advertisers + sites + t; }
  int ipsi(int m) const { return 3 * advertisers + sites + kTenureBuckets + m; }
  int isigma() const { return 3 * advertisers + sites + kTenureBuckets + months; }
  int izeta_bar() const { return isigma() + 1; }
  int igamma_bar() const { return isigma() + 2; }

  // Column names for the draws CSV; the derived gamma_a columns are appended
  // after the free parameters.
  std::vector<std::string> column_names(bool include_derived_gamma = true) const;
};

ThetaDraw theta_from_unconstrained(const ParamLayout& layout, std::span<const double> u);
std::vector<double> theta_to_unconstrained(const ParamLayout& layout, const ThetaDraw& theta);

// Sum of log|d theta / d u| over the log-transformed coordinates.
double transform_log_jacobian(const ParamLayout& layout, std::span<const double> u);

}  // namespace adlearn
