#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trajclone {

struct CheckResult {
  std::string name;
  bool passed = false;
  double metric = 0.0;     // worst observed error
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;
};

// Network + GMM loss gradients against fourth-order central differences (h = 1e-4).
CheckResult check_network_gradients(int draws, std::uint64_t seed);
// gmm_nll against a direct mixture-density evaluation in extended precision.
CheckResult check_gmm_oracle(int cases, std::uint64_t seed);
// cvar_estimate against a sort-free conditional tail mean, CVaR_0 == mean, monotone curves.
CheckResult check_cvar_oracle(int vectors, std::uint64_t seed);
// Masked tail gradient against finite differences of the empirical CVaR.
CheckResult check_cvar_gradient(const std::vector<double>& alphas, std::size_t n_samples, std::uint64_t seed);

std::vector<CheckResult> run_all_checks(std::uint64_t seed);

}  // namespace trajclone
