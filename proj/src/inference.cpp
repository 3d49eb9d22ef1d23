#include "adlearn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adlearn {

namespace {

double t_logpdf_sum(std::span<const double> xs, const PriorSpec& spec, double* dsum,
                    std::span<double> grad, int base_index) {
  double total = 0.0;
  (void)dsum;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    total += student_t_logpdf(xs[i], spec.t_df, 0.0, spec.t_scale);
    if (!grad.empty()) {
      const double z = xs[i] / spec.t_scale;
      // d/dx log t(x) = -(nu+1) x / (nu s^2 + x^2)
      grad[base_index + static_cast<int>(i)] +=
          -(spec.t_df + 1.0) * z / (spec.t_df + z * z) / spec.t_scale;
    }
  }
  return total;
}

}  // namespace

double log_prior(const ThetaDraw& theta, const PriorSpec& spec) {
  if (!theta.valid()) throw std::domain_error("log_prior: theta violates invariants");
  double lp = 0.0;
  for (double g : theta.g) lp += exponential_logpdf(g, 1.0);
  const double zeta_rate = 1.0 / theta.zeta_bar;
  for (double z : theta.zeta) lp += exponential_logpdf(z - kZetaShift, zeta_rate);
  for (double x : theta.xi) lp += student_t_logpdf(x, spec.t_df, 0.0, spec.t_scale);
  for (double x : theta.eta) lp += student_t_logpdf(x, spec.t_df, 0.0, spec.t_scale);
  for (double x : theta.phi) lp += student_t_logpdf(x, spec.t_df, 0.0, spec.t_scale);
  for (double x : theta.psi) lp += student_t_logpdf(x, spec.t_df, 0.0, spec.t_scale);
  lp += exponential_logpdf(theta.sigma, spec.sigma_rate);
  lp += exponential_logpdf(theta.zeta_bar, spec.zeta_bar_rate);
  lp += exponential_logpdf(theta.gamma_bar, spec.gamma_bar_rate);
  return lp;
}

double log_prior_grad(const ThetaDraw& theta, const ParamLayout& layout, std::span<double> grad,
                      const PriorSpec& spec) {
  if (!theta.valid()) throw std::domain_error("log_prior_grad: theta violates invariants");
  double lp = 0.0;
  const double zeta_rate = 1.0 / theta.zeta_bar;
  double d_zeta_bar = -spec.zeta_bar_rate;
  for (int a = 0; a < layout.advertisers; ++a) {
    lp += exponential_logpdf(theta.g[a], 1.0);
    grad[layout.ig(a)] += -1.0;  // d/d g_a of Exp(1); gamma chain handled by caller
    const double shifted = theta.zeta[a] - kZetaShift;
    lp += exponential_logpdf(shifted, zeta_rate);
    grad[layout.izeta(a)] += -zeta_rate;
    // d/d zeta_bar of [-log zeta_bar - shifted / zeta_bar]
    d_zeta_bar += -zeta_rate + shifted * zeta_rate * zeta_rate;
  }
  lp += t_logpdf_sum(theta.xi, spec, nullptr, grad, layout.ixi(0));
  lp += t_logpdf_sum(theta.eta, spec, nullptr, grad, layout.ieta(0));
  lp += t_logpdf_sum(theta.phi, spec, nullptr, grad, layout.iphi(0));
  lp += t_logpdf_sum(theta.psi, spec, nullptr, grad, layout.ipsi(0));
  lp += exponential_logpdf(theta.sigma, spec.sigma_rate);
  grad[layout.isigma()] += -spec.sigma_rate;
  lp += exponential_logpdf(theta.zeta_bar, spec.zeta_bar_rate);
  grad[layout.izeta_bar()] += d_zeta_bar;
  lp += exponential_logpdf(theta.gamma_bar, spec.gamma_bar_rate);
  grad[layout.igamma_bar()] += -spec.gamma_bar_rate;
  return lp;
}

ThetaDraw sample_prior(const ParamLayout& layout, KeyedRng& rng, const PriorSpec& spec) {
  auto exp_draw = [&](double rate) { return -std::log(rng.next_u01()) / rate; };
  auto t_draw = [&]() {
    // Student-t via normal over sqrt of scaled chi^2.
    const double z = rng.next_normal();
    double chi2 = 0.0;
    for (int i = 0; i < static_cast<int>(spec.t_df); ++i) {
      const double n = rng.next_normal();
      chi2 += n * n;
    }
    return spec.t_scale * z / std::sqrt(chi2 / spec.t_df);
  };
  ThetaDraw t;
  t.gamma_bar = exp_draw(spec.gamma_bar_rate);
  t.zeta_bar = exp_draw(spec.zeta_bar_rate);
  t.sigma = exp_draw(spec.sigma_rate);
  t.g.resize(layout.advertisers);
  t.zeta.resize(layout.advertisers);
  t.xi.resize(layout.advertisers);
  for (int a = 0; a < layout.advertisers; ++a) {
    t.g[a] = exp_draw(1.0);
    t.zeta[a] = kZetaShift + exp_draw(1.0 / t.zeta_bar);
    t.xi[a] = t_draw();
  }
  t.eta.resize(layout.sites);
  for (int s = 0; s < layout.sites; ++s) t.eta[s] = t_draw();
  t.phi.resize(kTenureBuckets);
  for (int k = 0; k < kTenureBuckets; ++k) t.phi[k] = t_draw();
  t.psi.resize(layout.months);
  for (int m = 0; m < layout.months; ++m) t.psi[m] = t_draw();
  return t;
}

Posterior::Posterior(const PreparedData* data, PriorSpec spec) : data_(data), spec_(spec) {}

double Posterior::value_and_grad(std::span<const double> u, std::span<double> grad,
                                 FloorDiag* diag) const {
  const ParamLayout& layout = data_->layout();
  const int dim = layout.dim();
  if (grad.size() != static_cast<std::size_t>(dim))
    throw std::invalid_argument("Posterior: gradient size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  for (double v : u)
    if (!std::isfinite(v)) return -kInf;

  const ThetaDraw theta = theta_from_unconstrained(layout, u);
  if (!theta.valid()) return -kInf;

  // Constrained-space gradient; the g-slots accumulate d/d gamma_a from the
  // likelihood and d/d g_a from the prior separately.
  std::vector<double> dgamma(layout.advertisers, 0.0);
  double value = 0.0;
  {
    std::vector<double> glik(dim, 0.0);
    value += data_->log_likelihood_grad(theta, glik, diag);
    for (int a = 0; a < layout.advertisers; ++a) {
      dgamma[a] = glik[layout.ig(a)];
      glik[layout.ig(a)] = 0.0;
    }
    for (int i = 0; i < dim; ++i) grad[i] += glik[i];
  }
  value += log_prior_grad(theta, layout, grad, spec_);
  if (!std::isfinite(value)) return -kInf;

  // Chain rule to the unconstrained scale.
  const double inv_gb = 1.0 / theta.gamma_bar;
  double d_u_gamma_bar_from_gamma = 0.0;
  for (int a = 0; a < layout.advertisers; ++a) {
    const double g = theta.g[a];
    const double denom = inv_gb + g;
    // d gamma / d g and d gamma / d gamma_bar
    const double dgam_dg = inv_gb / (denom * denom);
    const double dgam_dgb = g * inv_gb * inv_gb / (denom * denom);
    grad[layout.ig(a)] = (grad[layout.ig(a)] + dgamma[a] * dgam_dg) * g + 1.0;
    d_u_gamma_bar_from_gamma += dgamma[a] * dgam_dgb;
    grad[layout.izeta(a)] = grad[layout.izeta(a)] * (theta.zeta[a] - kZetaShift) + 1.0;
  }
  grad[layout.isigma()] = grad[layout.isigma()] * theta.sigma + 1.0;
  grad[layout.izeta_bar()] = grad[layout.izeta_bar()] * theta.zeta_bar + 1.0;
  grad[layout.igamma_bar()] =
      (grad[layout.igamma_bar()] + d_u_gamma_bar_from_gamma) * theta.gamma_bar + 1.0;

  value += transform_log_jacobian(layout, u);
  for (double v : grad)
    if (!std::isfinite(v)) return -kInf;
  return value;
}

double Posterior::value(std::span<const double> u, FloorDiag* diag) const {
  const ParamLayout& layout = data_->layout();
  for (double v : u)
    if (!std::isfinite(v)) return -kInf;
  const ThetaDraw theta = theta_from_unconstrained(layout, u);
  if (!theta.valid()) return -kInf;
  double value = data_->log_likelihood(theta, diag);
  value += log_prior(theta, spec_);
  value += transform_log_jacobian(layout, u);
  return std::isfinite(value) ? value : -kInf;
}

MapResult map_estimate(const LogDensityGrad& target, std::span<const double> start,
                       const MapOptions& options) {
  const int n = static_cast<int>(start.size());
  std::vector<double> x(start.begin(), start.end());
  std::vector<double> grad(n), x_new(n), grad_new(n);
  double f = target(x, grad);
  if (!std::isfinite(f)) throw std::domain_error("map_estimate: start has non-finite density");

  // L-BFGS two-loop recursion on the negative log density.
  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;

  auto inf_norm = [](std::span<const double> v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::fabs(e));
    return m;
  };

  MapResult result;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (inf_norm(grad) <= options.grad_tolerance) {
      result.converged = true;
      break;
    }
    // Direction = H * grad (ascent).
    std::vector<double> q(grad.begin(), grad.end());
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      double sa = 0.0;
      for (int j = 0; j < n; ++j) sa += s_hist[i][j] * q[j];
      alpha[i] = rho_hist[i] * sa;
      for (int j = 0; j < n; ++j) q[j] -= alpha[i] * y_hist[i][j];
    }
    double scale = 1.0;
    if (m > 0) {
      double sy = 0.0, yy = 0.0;
      for (int j = 0; j < n; ++j) {
        sy += s_hist[m - 1][j] * y_hist[m - 1][j];
        yy += y_hist[m - 1][j] * y_hist[m - 1][j];
      }
      if (yy > 0.0) scale = sy / yy;
    }
    for (int j = 0; j < n; ++j) q[j] *= scale;
    for (int i = 0; i < m; ++i) {
      double yq = 0.0;
      for (int j = 0; j < n; ++j) yq += y_hist[i][j] * q[j];
      const double beta = rho_hist[i] * yq;
      for (int j = 0; j < n; ++j) q[j] += s_hist[i][j] * (alpha[i] - beta);
    }

    double dir_grad = 0.0;
    for (int j = 0; j < n; ++j) dir_grad += q[j] * grad[j];
    if (!(dir_grad > 0.0)) {  // not an ascent direction; fall back to gradient
      q.assign(grad.begin(), grad.end());
      dir_grad = 0.0;
      for (int j = 0; j < n; ++j) dir_grad += grad[j] * grad[j];
    }

    // Backtracking Armijo line search.
    double step = 1.0;
    double f_new = -kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int j = 0; j < n; ++j) x_new[j] = x[j] + step * q[j];
      f_new = target(x_new, grad_new);
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * dir_grad) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(n), y(n);
    double sy = 0.0;
    for (int j = 0; j < n; ++j) {
      s[j] = x_new[j] - x[j];
      y[j] = grad[j] - grad_new[j];  // curvature of the negative density
      sy += s[j] * y[j];
    }
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    x.swap(x_new);
    grad.swap(grad_new);
    f = f_new;
  }
  result.x = std::move(x);
  result.value = f;
  result.grad_norm = inf_norm(grad);
  result.iterations = iter;
  if (!result.converged) result.converged = result.grad_norm <= options.grad_tolerance;
  return result;
}

}  // namespace adlearn
