#pragma once

// Hierarchical priors, the log-posterior on the unconstrained scale with
// analytic gradient, and a quasi-Newton MAP optimizer. The free coordinates
// are (log g_a, log(zeta_a - .01), xi_a, eta_s, phi, psi, log sigma,
// log zeta_bar, log gamma_bar); gamma_a is derived.

#include <functional>
#include <span>
#include <vector>

#include "adlearn/likelihood.hpp"
#include "adlearn/rng.hpp"
#include "adlearn/theta.hpp"

namespace adlearn {

// Prior constants. Rates follow the tail-probability calibration
// Pr[X > U] = alpha => rate = -log(alpha) / U.
struct PriorSpec {
  double t_df = 4.0;           // Student-t fixed effects
  double t_scale = 1.0;
  double sigma_rate = 2.302585092994045684;      // log 10, Pr[sigma > 1] = .1
  double zeta_bar_rate = 0.2302585092994045684;  // log(10)/10, Pr[zeta_bar > 10] = .1
  double gamma_bar_rate = 1151.2925464970226;    // -log(.1)/.002, Pr[gamma_bar > .002] = .1
};

// Log prior density on the constrained scale (no transform Jacobians).
double log_prior(const ThetaDraw& theta, const PriorSpec& spec = {});

// Adds d(log prior)/d(constrained theta) into grad using ParamLayout slots
// (g-slot = d/d gamma_a is NOT used here: the prior acts on g_a directly, so
// the g-slot holds d/d g_a; see Posterior for how the two are combined).
double log_prior_grad(const ThetaDraw& theta, const ParamLayout& layout, std::span<double> grad,
                      const PriorSpec& spec = {});

// Draw one theta from the priors (used by market generation and prior
// predictive checks).
ThetaDraw sample_prior(const ParamLayout& layout, KeyedRng& rng, const PriorSpec& spec = {});

// Log-density with gradient on the unconstrained scale.
// Fills grad (size = dim) and returns the value; returns -inf (and leaves
// grad unusable) for non-finite evaluations, which the sampler treats as a
// divergence.
class Posterior {
 public:
  Posterior(const PreparedData* data, PriorSpec spec = {});

  double value_and_grad(std::span<const double> u, std::span<double> grad,
                        FloorDiag* diag = nullptr) const;
  double value(std::span<const double> u, FloorDiag* diag = nullptr) const;

  const ParamLayout& layout() const { return data_->layout(); }
  int dim() const { return data_->layout().dim(); }

 private:
  const PreparedData* data_;
  PriorSpec spec_;
};

using LogDensityGrad =
    std::function<double(std::span<const double>, std::span<double>)>;

struct MapOptions {
  int max_iterations = 1000;
  double grad_tolerance = 1e-6;  // infinity norm
  int history = 10;              // L-BFGS memory
};

struct MapResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Maximizes the log density with L-BFGS from the given start.
MapResult map_estimate(const LogDensityGrad& target, std::span<const double> start,
                       const MapOptions& options = {});

}  // namespace adlearn
