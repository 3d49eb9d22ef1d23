#pragma once

// Log-price fixed-effects regression and smoothed menus:
//   E[log p_sw(x)] = mu_w + mu_s + lambda log x,
// predictions include the half-residual-variance correction, and menu
// availability is imputed within a +-4 week window around observed offers.

#include <map>
#include <string>
#include <vector>

#include "adlearn/model.hpp"

namespace adlearn {

struct PriceObservation {
  int site = 0;
  int week = 0;
  int days = 0;     // >= 1
  double price = 0; // dollars, > 0
};

struct PriceModel {
  std::map<int, double> mu_w;  // week effects, reference week absorbs the intercept
  std::map<int, double> mu_s;  // site effects, reference site = 0
  double lambda = 0.0;         // elasticity of price in log duration
  double resid_var = 0.0;      // residual variance of log price
  double r_squared = 0.0;
};

// OLS with week and site fixed effects (first level of each dropped) and
// log(days). Throws naming the collinear levels on rank deficiency.
PriceModel fit_price_model(const std::vector<PriceObservation>& observations);

// exp(resid_var/2 + mu_w + mu_s + lambda log x); unknown levels are an error.
double predict_price(const PriceModel& model, int site, int week, int days);

// Duration x is available at (s, w) iff observed at (s, w') with |w-w'| <=
// window; prices come from predict_price. Returns menus for weeks 1..n_weeks.
std::map<std::pair<int, int>, Menu> impute_menu_availability(
    const std::vector<PriceObservation>& observed, const PriceModel& model, int n_weeks,
    int window = 4);

}  // namespace adlearn
