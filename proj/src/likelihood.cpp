#include "adlearn/likelihood.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

#include "adlearn/csv.hpp"

namespace adlearn {

EpsilonBounds compute_bounds(const ChoiceObservation& obs, const ThetaSlice& slice,
                             double traffic) {
  const double log_ratio = std::log(slice.kappa + static_cast<double>(obs.belief.clicks)) -
                           std::log(slice.kappa + slice.gamma *
                                                      static_cast<double>(obs.belief.impressions));
  const double log_mu = log_ratio + slice.xi + slice.eta + slice.phi_tau + slice.psi_m;
  const double log_zeta = std::log(slice.zeta);

  EpsilonBounds bounds;
  if (obs.menu.empty()) {
    if (obs.chosen_days != 0)
      throw std::invalid_argument("compute_bounds: purchase recorded with empty menu");
    return bounds;  // no constraints at all
  }

  auto log_span = [&](double tx_hi, double tx_lo) {
    // log of zeta^-1 * log((t x_hi zeta + 1) / (t x_lo zeta + 1)), folded into
    // the bound as log(L) - log(zeta).
    return std::log(std::log1p(tx_hi * slice.zeta) - std::log1p(tx_lo * slice.zeta)) - log_zeta;
  };

  if (obs.chosen_days == 0) {
    const auto& first = obs.menu[0];
    bounds.upper = std::log(first.price_dollars()) - log_mu -
                   log_span(traffic * first.days, 0.0);
    return bounds;
  }

  const auto idx = obs.menu.find_days(obs.chosen_days);
  if (!idx) throw std::invalid_argument("compute_bounds: chosen duration not on the menu");
  const std::size_t i = *idx;
  const auto& chosen = obs.menu[i];

  // Next-shorter alternative; the outside option stands in below the
  // shortest paid option.
  const double down_days = i > 0 ? obs.menu[i - 1].days : 0.0;
  const double down_price = i > 0 ? obs.menu[i - 1].price_dollars() : 0.0;
  bounds.lower = std::log(chosen.price_dollars() - down_price) - log_mu -
                 log_span(traffic * chosen.days, traffic * down_days);

  if (i + 1 < obs.menu.size()) {
    const auto& up = obs.menu[i + 1];
    bounds.upper = std::log(up.price_dollars() - chosen.price_dollars()) - log_mu -
                   log_span(traffic * up.days, traffic * chosen.days);
  }
  return bounds;
}

double obs_log_prob(const EpsilonBounds& bounds, double sigma, FloorDiag* diag) {
  if (!(sigma > 0.0)) throw std::domain_error("obs_log_prob: sigma must be > 0");
  const double log_floor = diag ? diag->log_floor : std::log(1e-300);
  if (!(bounds.lower < bounds.upper)) {
    if (diag) ++diag->hits;
    return log_floor;
  }
  const double lo = bounds.lower == -kInf ? -kInf : bounds.lower / sigma;
  const double hi = bounds.upper == kInf ? kInf : bounds.upper / sigma;
  const double lp = log_interval_prob_std(lo, hi);
  if (!(lp >= log_floor)) {  // catches -inf, NaN and underflow below the floor
    if (diag) ++diag->hits;
    return log_floor;
  }
  return lp;
}

double dataset_log_likelihood(std::span<const ChoiceObservation> observations,
                              const ThetaDraw& theta, std::span<const double> site_traffic,
                              double kappa, FloorDiag* diag) {
  double total = 0.0;
  for (const auto& obs : observations) {
    const int a = obs.advertiser;
    const ThetaSlice slice{theta.gamma(a), theta.zeta[a],  theta.xi[a],
                           theta.eta[obs.site], theta.phi[obs.tau], theta.psi[obs.month],
                           kappa};
    total += obs_log_prob(compute_bounds(obs, slice, site_traffic[obs.site]), theta.sigma, diag);
  }
  return total;
}

PreparedData::Prepared PreparedData::prepare_one(const ChoiceObservation& obs) const {
  Prepared p{};
  p.a = obs.advertiser;
  p.s = obs.site;
  p.tau = obs.tau;
  p.month = obs.month;
  p.n_impressions = static_cast<double>(obs.belief.impressions);
  p.log_num = std::log(kappa_ + static_cast<double>(obs.belief.clicks));
  p.weight = 1.0;
  p.has_lower = false;
  p.has_upper = false;
  if (obs.menu.empty()) return p;

  const double t = traffic_[obs.site];
  if (obs.chosen_days == 0) {
    const auto& first = obs.menu[0];
    p.has_upper = true;
    p.log_gap_hi = std::log(first.price_dollars());
    p.tx_chosen = 0.0;
    p.tx_up = t * first.days;
    return p;
  }
  const auto idx = obs.menu.find_days(obs.chosen_days);
  if (!idx) throw std::invalid_argument("PreparedData: chosen duration not on the menu");
  const std::size_t i = *idx;
  const auto& chosen = obs.menu[i];
  p.tx_chosen = t * chosen.days;
  p.has_lower = true;
  const double down_price = i > 0 ? obs.menu[i - 1].price_dollars() : 0.0;
  p.tx_down = i > 0 ? t * obs.menu[i - 1].days : 0.0;
  p.log_gap_lo = std::log(chosen.price_dollars() - down_price);
  if (i + 1 < obs.menu.size()) {
    p.has_upper = true;
    p.log_gap_hi = std::log(obs.menu[i + 1].price_dollars() - chosen.price_dollars());
    p.tx_up = t * obs.menu[i + 1].days;
  }
  return p;
}

PreparedData::PreparedData(std::vector<ChoiceObservation> observations,
                           std::vector<double> site_traffic, ParamLayout layout, double kappa,
                           bool deduplicate)
    : observations_(std::move(observations)),
      traffic_(std::move(site_traffic)),
      layout_(layout),
      kappa_(kappa) {
  original_.reserve(observations_.size());
  for (const auto& obs : observations_) {
    if (obs.advertiser < 0 || obs.advertiser >= layout_.advertisers ||
        obs.site < 0 || obs.site >= layout_.sites || obs.tau < 0 ||
        obs.tau >= kTenureBuckets || obs.month < 0 || obs.month >= layout_.months)
      throw std::invalid_argument("PreparedData: observation indices out of range");
    original_.push_back(prepare_one(obs));
  }
  if (!deduplicate) {
    prepared_ = original_;
    return;
  }
  // Observations that share every likelihood-relevant feature (typical for
  // long no-purchase stretches) collapse into one weighted entry.
  using Key = std::tuple<int, int, int, int, double, double, int, double, double, double,
                         double, double>;
  std::map<Key, std::size_t> index;
  for (const auto& p : original_) {
    Key key{p.a, p.s, p.tau, p.month, p.n_impressions, p.log_num,
            (p.has_lower ? 1 : 0) + (p.has_upper ? 2 : 0),
            p.has_lower ? p.log_gap_lo : 0.0, p.has_upper ? p.log_gap_hi : 0.0,
            p.tx_chosen, p.tx_down, p.tx_up};
    auto [it, inserted] = index.emplace(key, prepared_.size());
    if (inserted)
      prepared_.push_back(p);
    else
      prepared_[it->second].weight += 1.0;
  }
}

double PreparedData::eval(const ThetaDraw& theta, std::span<double> grad, bool want_grad,
                          std::vector<double>* pointwise, FloorDiag* diag) const {
  const auto& items = pointwise ? original_ : prepared_;
  const double sigma = theta.sigma;
  const double log_floor = diag ? diag->log_floor : std::log(1e-300);
  const int A = layout_.advertisers;

  // Per-advertiser caches for this evaluation.
  std::vector<double> gamma(A), log_zeta(A);
  const double inv_gb = 1.0 / theta.gamma_bar;
  for (int a = 0; a < A; ++a) {
    gamma[a] = theta.g[a] / (inv_gb + theta.g[a]);
    log_zeta[a] = std::log(theta.zeta[a]);
  }

  double total = 0.0;
  if (pointwise) pointwise->resize(items.size());

  for (std::size_t k = 0; k < items.size(); ++k) {
    const Prepared& p = items[k];
    const double zeta = theta.zeta[p.a];
    const double denom = kappa_ + gamma[p.a] * p.n_impressions;
    const double log_mu = p.log_num - std::log(denom) + theta.xi[p.a] + theta.eta[p.s] +
                          theta.phi[p.tau] + theta.psi[p.month];

    double lb = -kInf, ub = kInf;
    double span_lo = 0.0, span_hi = 0.0;  // the inner log-ratio terms L
    const double l1p_chosen = std::log1p(p.tx_chosen * zeta);
    if (p.has_lower) {
      span_lo = l1p_chosen - std::log1p(p.tx_down * zeta);
      lb = p.log_gap_lo - log_mu - std::log(span_lo) + log_zeta[p.a];
    }
    if (p.has_upper) {
      span_hi = std::log1p(p.tx_up * zeta) - l1p_chosen;
      ub = p.log_gap_hi - log_mu - std::log(span_hi) + log_zeta[p.a];
    }

    if (!p.has_lower && !p.has_upper) {
      if (pointwise) (*pointwise)[k] = 0.0;
      continue;
    }

    if (!(lb < ub)) {
      if (diag) ++diag->hits;
      total += p.weight * log_floor;
      if (pointwise) (*pointwise)[k] = log_floor;
      continue;
    }
    const double a_std = p.has_lower ? lb / sigma : -kInf;
    const double b_std = p.has_upper ? ub / sigma : kInf;
    double lp = log_interval_prob_std(a_std, b_std);
    if (!(lp >= log_floor)) {
      if (diag) ++diag->hits;
      total += p.weight * log_floor;
      if (pointwise) (*pointwise)[k] = log_floor;
      continue;  // floored observations contribute no gradient
    }
    total += p.weight * lp;
    if (pointwise) (*pointwise)[k] = lp;
    if (!want_grad) continue;

    // w = phi(z) / (sigma D), the derivative of log D with respect to the
    // corresponding bound.
    const double w_lo = p.has_lower ? std::exp(norm_logpdf(a_std) - lp) / sigma : 0.0;
    const double w_hi = p.has_upper ? std::exp(norm_logpdf(b_std) - lp) / sigma : 0.0;

    const double dF = p.weight * (w_lo - w_hi);  // d logP / d(xi+eta+phi+psi)
    const double dgamma = -dF * p.n_impressions / denom;
    double dzeta = 0.0;
    const double d_l1p_chosen = p.tx_chosen / (1.0 + p.tx_chosen * zeta);
    if (p.has_upper) {
      const double dspan_hi = p.tx_up / (1.0 + p.tx_up * zeta) - d_l1p_chosen;
      dzeta += p.weight * w_hi * (1.0 / zeta - dspan_hi / span_hi);
    }
    if (p.has_lower) {
      const double dspan_lo = d_l1p_chosen - p.tx_down / (1.0 + p.tx_down * zeta);
      dzeta -= p.weight * w_lo * (1.0 / zeta - dspan_lo / span_lo);
    }
    double dsigma = 0.0;
    if (p.has_lower) dsigma += p.weight * w_lo * a_std;
    if (p.has_upper) dsigma -= p.weight * w_hi * b_std;

    grad[layout_.ig(p.a)] += dgamma;
    grad[layout_.izeta(p.a)] += dzeta;
    grad[layout_.ixi(p.a)] += dF;
    grad[layout_.ieta(p.s)] += dF;
    grad[layout_.iphi(p.tau)] += dF;
    grad[layout_.ipsi(p.month)] += dF;
    grad[layout_.isigma()] += dsigma;
  }
  return total;
}

double PreparedData::log_likelihood(const ThetaDraw& theta, FloorDiag* diag) const {
  return eval(theta, {}, false, nullptr, diag);
}

double PreparedData::log_likelihood_grad(const ThetaDraw& theta, std::span<double> grad,
                                         FloorDiag* diag) const {
  if (grad.size() != static_cast<std::size_t>(layout_.dim()))
    throw std::invalid_argument("log_likelihood_grad: gradient size mismatch");
  return eval(theta, grad, true, nullptr, diag);
}

std::vector<double> PreparedData::pointwise(const ThetaDraw& theta, FloorDiag* diag) const {
  std::vector<double> out;
  eval(theta, {}, false, &out, diag);
  return out;
}

std::vector<std::vector<double>> pointwise_loglik_matrix(const PreparedData& data,
                                                         std::span<const ThetaDraw> draws) {
  if (draws.empty()) throw std::invalid_argument("pointwise_loglik_matrix: no draws");
  std::vector<std::vector<double>> matrix;
  matrix.reserve(draws.size());
  for (const auto& theta : draws) matrix.push_back(data.pointwise(theta));
  return matrix;
}

void write_pointwise_loglik_csv(const std::string& path,
                                const std::vector<std::vector<double>>& matrix,
                                const std::vector<std::string>& comment_lines) {
  CsvWriter writer(path, {"draw", "obs_index", "loglik"}, comment_lines);
  for (std::size_t d = 0; d < matrix.size(); ++d)
    for (std::size_t i = 0; i < matrix[d].size(); ++i)
      writer.write_row({std::to_string(d), std::to_string(i), format_double(matrix[d][i])});
  writer.close();
}

}  // namespace adlearn
