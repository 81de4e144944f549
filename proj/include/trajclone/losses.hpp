#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trajclone/geometry.hpp"
#include "trajclone/network.hpp"

namespace trajclone {

// Raw GMM head output: [log_pi (K), mu (K*D), log_var (K*D)], mode-major.
struct GmmLayout {
  int modes = 2;
  int dim = 10;

  std::size_t size() const { return static_cast<std::size_t>(modes) * (1 + 2 * static_cast<std::size_t>(dim)); }
  std::size_t mu(int k, int d) const { return static_cast<std::size_t>(modes + k * dim + d); }
  std::size_t log_var(int k, int d) const { return static_cast<std::size_t>(modes + modes * dim + k * dim + d); }
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. the raw head output
};

// Negative log-likelihood of `target` under the diagonal mixture, via log-sum-exp.
LossAndGrad gmm_nll(std::span<const double> raw, std::span<const double> target, const GmmLayout& layout);

std::vector<double> softmax(std::span<const double> logits);

// Zeroes the log_var block of a GMM gradient while epoch < freeze_epochs.
void sigma_freeze(std::span<double> grad, const GmmLayout& layout, int epoch, int freeze_epochs);

// Index of the largest mixing coefficient; lowest index on ties.
int select_mode(std::span<const double> raw, const GmmLayout& layout);
// Mean of the selected mode, in normalized units.
std::vector<double> select_mode_mean(std::span<const double> raw, const GmmLayout& layout);
// Mean of the selected mode, inverse-normalized into ego-frame meters.
std::vector<Vec2> select_trajectory(std::span<const double> raw, const GmmLayout& layout, const Normalizer& norm);

// Mean squared error over dimensions.
LossAndGrad mse_loss(std::span<const double> pred, std::span<const double> target);

struct MultiTaskWeights {
  double w_traj = 1.0;
  double w_aff = 0.0;

  void validate() const;
};

double multitask_loss(double traj_loss, double aff_loss, const MultiTaskWeights& w);

// Tail selection with tail_rank m: nu = m-th smallest loss, selected = losses strictly above nu.
// m == 0 selects everything. When nothing lies strictly above nu, the top `fallback` losses are
// selected (lowest index first among ties).
std::vector<char> cvar_tail_mask(std::span<const double> losses, std::size_t m, std::size_t fallback);

// ceil(alpha * n), robust to representation error in alpha.
std::size_t cvar_tail_rank(double alpha, std::size_t n);

double cvar_estimate(std::span<const double> losses, double alpha);

// Samples used by cvar_estimate. Throws when the batch is below ceil(1 / (1 - alpha)).
std::vector<char> cvar_batch_mask(std::span<const double> losses, double alpha);
std::size_t cvar_min_batch(double alpha);

struct PercentilePoint {
  int percentile = 0;
  double cvar = 0.0;
};

// CVaR at p = 0, 5, ..., 95.
std::vector<PercentilePoint> cvar_percentile_curve(std::span<const double> losses);

struct CvarGradientReport {
  int dimension = 1;
  double alpha = 0.0;
  std::size_t n_samples = 0;
  std::vector<double> theta;
  std::vector<double> estimator;    // masked mean of per-sample gradients
  std::vector<double> finite_diff;  // central differences of the empirical CVaR
  double relative_error = 0.0;
};

// Quadratic-Gaussian check of the tail-gradient identity: L(theta; z) = 0.5 |theta - z|^2,
// z ~ N(0, I), both sides evaluated on the same samples.
CvarGradientReport mc_verify_cvar_gradient(int dimension, double alpha, std::size_t n_samples, std::uint64_t seed,
                                           std::vector<double> theta = {});

}  // namespace trajclone
