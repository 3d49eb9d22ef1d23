#include "adlearn/theta.hpp"

#include <cmath>
#include <stdexcept>

namespace adlearn {

bool ThetaDraw::valid() const {
  if (phi.size() != static_cast<std::size_t>(kTenureBuckets)) return false;
  if (g.size() != zeta.size() || g.size() != xi.size()) return false;
  if (!(sigma > 0.0) || !(zeta_bar > 0.0) || !(gamma_bar > 0.0)) return false;
  for (double v : g)
    if (!(v > 0.0)) return false;
  for (double v : zeta)
    if (!(v > kZetaShift)) return false;
  for (int a = 0; a < n_advertisers(); ++a) {
    const double ga = gamma(a);
    if (!(ga > 0.0 && ga < 1.0)) return false;
  }
  return true;
}

std::vector<std::string> ParamLayout::column_names(bool include_derived_gamma) const {
  std::vector<std::string> names;
  names.reserve(dim() + (include_derived_gamma ? advertisers : 0));
  for (int a = 0; a < advertisers; ++a) names.push_back("g[" + std::to_string(a) + "]");
  for (int a = 0; a < advertisers; ++a) names.push_back("zeta[" + std::to_string(a) + "]");
  for (int a = 0; a < advertisers; ++a) names.push_back("xi[" + std::to_string(a) + "]");
  for (int s = 0; s < sites; ++s) names.push_back("eta[" + std::to_string(s) + "]");
  for (int t = 0; t < kTenureBuckets; ++t) names.push_back("phi[" + std::to_string(t) + "]");
  for (int m = 0; m < months; ++m) names.push_back("psi[" + std::to_string(m) + "]");
  names.push_back("sigma");
  names.push_back("zeta_bar");
  names.push_back("gamma_bar");
  if (include_derived_gamma)
    for (int a = 0; a < advertisers; ++a) names.push_back("gamma[" + std::to_string(a) + "]");
  return names;
}

ThetaDraw theta_from_unconstrained(const ParamLayout& layout, std::span<const double> u) {
  if (u.size() != static_cast<std::size_t>(layout.dim()))
    throw std::invalid_argument("theta_from_unconstrained: dimension mismatch");
  ThetaDraw t;
  const int A = layout.advertisers;
  t.g.resize(A);
  t.zeta.resize(A);
  t.xi.resize(A);
  t.eta.resize(layout.sites);
  t.phi.resize(kTenureBuckets);
  t.psi.resize(layout.months);
  for (int a = 0; a < A; ++a) {
    t.g[a] = std::exp(u[layout.ig(a)]);
    t.zeta[a] = kZetaShift + std::exp(u[layout.izeta(a)]);
    t.xi[a] = u[layout.ixi(a)];
  }
  for (int s = 0; s < layout.sites; ++s) t.eta[s] = u[layout.ieta(s)];
  for (int k = 0; k < kTenureBuckets; ++k) t.phi[k] = u[layout.iphi(k)];
  for (int m = 0; m < layout.months; ++m) t.psi[m] = u[layout.ipsi(m)];
  t.sigma = std::exp(u[layout.isigma()]);
  t.zeta_bar = std::exp(u[layout.izeta_bar()]);
  t.gamma_bar = std::exp(u[layout.igamma_bar()]);
  return t;
}

std::vector<double> theta_to_unconstrained(const ParamLayout& layout, const ThetaDraw& theta) {
  std::vector<double> u(layout.dim());
  for (int a = 0; a < layout.advertisers; ++a) {
    u[layout.ig(a)] = std::log(theta.g[a]);
    u[layout.izeta(a)] = std::log(theta.zeta[a] - kZetaShift);
    u[layout.ixi(a)] = theta.xi[a];
  }
  for (int s = 0; s < layout.sites; ++s) u[layout.ieta(s)] = theta.eta[s];
  for (int k = 0; k < kTenureBuckets; ++k) u[layout.iphi(k)] = theta.phi[k];
  for (int m = 0; m < layout.months; ++m) u[layout.ipsi(m)] = theta.psi[m];
  u[layout.isigma()] = std::log(theta.sigma);
  u[layout.izeta_bar()] = std::log(theta.zeta_bar);
  u[layout.igamma_bar()] = std::log(theta.gamma_bar);
  return u;
}

double transform_log_jacobian(const ParamLayout& layout, std::span<const double> u) {
  double lj = 0.0;
  for (int a = 0; a < layout.advertisers; ++a) lj += u[layout.ig(a)] + u[layout.izeta(a)];
  lj += u[layout.isigma()] + u[layout.izeta_bar()] + u[layout.igamma_bar()];
  return lj;
}

}  // namespace adlearn
