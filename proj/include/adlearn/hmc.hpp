#pragma once

// Hamiltonian Monte Carlo with dual-averaging step-size adaptation and a
// windowed diagonal mass matrix, plus rank-normalized split R-hat and
// bulk/tail effective sample sizes. Chains are independent and fully
// deterministic given the seed.

#include <cstdint>
#include <string>
#include <vector>

#include "adlearn/inference.hpp"

namespace adlearn {

struct SamplerConfig {
  int chains = 4;
  int warmup = 1000;
  int samples = 1000;
  double target_accept = 0.8;
  int max_leapfrog = 32;  // trajectory length is jittered in [1, max_leapfrog]
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  // Optional per-chain initial points (unconstrained); empty = N(0, 0.1) around 0.
  std::vector<std::vector<double>> inits;
};

struct ChainDiagnostics {
  std::vector<double> split_rhat;  // per parameter
  std::vector<double> ess_bulk;
  std::vector<double> ess_tail;
  long long divergences = 0;
  long long floor_hits = 0;
  std::vector<std::string> flags;  // degenerate cases (constant chains, ...)
};

struct HmcResult {
  // draws[chain][iteration][dim], post-warmup only
  std::vector<std::vector<std::vector<double>>> chains;
  std::vector<double> step_size;          // adapted, per chain
  std::vector<std::vector<double>> inv_metric;  // per chain
  std::vector<double> accept_rate;        // post-warmup mean acceptance prob
  long long divergences = 0;              // post-warmup
  long long floor_hits = 0;               // accumulated from the target
};

// target returns the log density and fills the gradient; -inf marks a
// rejected (divergent) evaluation. Throws if every chain ends fully
// divergent.
HmcResult hmc_sample(const LogDensityGrad& target, int dim, const SamplerConfig& config);

// Rank-normalized split R-hat and ESS over the post-warmup draws.
// Requires >= 4 total draws; with a single chain, the split pair is used.
ChainDiagnostics diagnostics(const std::vector<std::vector<std::vector<double>>>& chains);

}  // namespace adlearn
