#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "trajclone/losses.hpp"

using namespace trajclone;

namespace {

// Brute force: sort, take the m = ceil(alpha * n) smallest as the body, average the rest; if
// nothing is strictly above the m-th smallest value, fall back to the largest n - floor(alpha * n).
double brute_cvar(std::vector<double> v, double alpha) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const std::size_t m = static_cast<std::size_t>(std::ceil(alpha * n - 1e-9));
  if (m == 0) return std::accumulate(v.begin(), v.end(), 0.0) / n;
  const double nu = v[m - 1];
  double sum = 0.0;
  std::size_t cnt = 0;
  for (double x : v) {
    if (x > nu) {
      sum += x;
      ++cnt;
    }
  }
  if (cnt == 0) {
    cnt = n - static_cast<std::size_t>(std::floor(alpha * n));
    sum = std::accumulate(v.end() - static_cast<long>(cnt), v.end(), 0.0);
  }
  return sum / cnt;
}

std::vector<double> iota_losses(int n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

}  // namespace

TEST(GmmNll, SingleGaussianReduction) {
  const GmmLayout layout{1, 3};
  std::vector<double> raw(layout.size(), 0.0);
  raw[layout.mu(0, 0)] = 0.5;
  raw[layout.mu(0, 1)] = -1.0;
  raw[layout.mu(0, 2)] = 2.0;
  const std::vector<double> y{1.0, 1.0, 1.0};
  const LossAndGrad lg = gmm_nll(raw, y, layout);
  const double sq = 0.25 + 4.0 + 1.0;
  EXPECT_NEAR(lg.loss, 0.5 * sq + 1.5 * std::log(2.0 * std::numbers::pi), 1e-12);
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(lg.grad[layout.mu(0, d)], raw[layout.mu(0, d)] - y[d], 1e-12);
  EXPECT_NEAR(lg.grad[0], 0.0, 1e-15);
}

TEST(GmmNll, SymmetricModesHaveZeroMixingGradient) {
  const GmmLayout layout{2, 2};
  std::vector<double> raw(layout.size(), 0.0);
  for (int d = 0; d < 2; ++d) {
    raw[layout.mu(0, d)] = 1.3;
    raw[layout.mu(1, d)] = -1.3;
  }
  const LossAndGrad lg = gmm_nll(raw, std::vector<double>{0.0, 0.0}, layout);
  EXPECT_NEAR(lg.grad[0], 0.0, 1e-15);
  EXPECT_NEAR(lg.grad[1], 0.0, 1e-15);
}

TEST(GmmNll, MatchesDirectDensity) {
  Rng rng(13);
  const GmmLayout layout{2, 3};
  for (int c = 0; c < 50; ++c) {
    std::vector<double> raw(layout.size());
    for (double& r : raw) r = uniform(rng, -1.0, 1.0);
    std::vector<double> y(3);
    for (double& v : y) v = uniform(rng, -2.0, 2.0);
    long double z = 0.0L, dens = 0.0L;
    for (int k = 0; k < 2; ++k) z += std::exp(static_cast<long double>(raw[k]));
    for (int k = 0; k < 2; ++k) {
      long double comp = std::exp(static_cast<long double>(raw[k])) / z;
      for (int d = 0; d < 3; ++d) {
        const long double var = std::exp(static_cast<long double>(raw[layout.log_var(k, d)]));
        const long double r = y[d] - raw[layout.mu(k, d)];
        comp *= std::exp(-0.5L * r * r / var) / std::sqrt(2.0L * std::numbers::pi_v<long double> * var);
      }
      dens += comp;
    }
    EXPECT_NEAR(gmm_nll(raw, y, layout).loss, static_cast<double>(-std::log(dens)), 1e-10);
  }
}

TEST(GmmNll, GradientMatchesFiniteDifferences) {
  Rng rng(21);
  const GmmLayout layout{3, 2};
  std::vector<double> raw(layout.size());
  for (double& r : raw) r = uniform(rng, -1.0, 1.0);
  const std::vector<double> y{0.4, -0.9};
  const LossAndGrad lg = gmm_nll(raw, y, layout);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::vector<double> up = raw, dn = raw;
    up[i] += 1e-6;
    dn[i] -= 1e-6;
    const double fd = (gmm_nll(up, y, layout).loss - gmm_nll(dn, y, layout).loss) / 2e-6;
    EXPECT_NEAR(lg.grad[i], fd, 1e-7);
  }
}

TEST(GmmNll, StableForFarTargets) {
  const GmmLayout layout{2, 1};
  const std::vector<double> raw{0.0, 0.0, 0.0, 0.0, -5.0, -5.0};
  const LossAndGrad lg = gmm_nll(raw, std::vector<double>{1e3}, layout);
  EXPECT_TRUE(std::isfinite(lg.loss));
  for (double g : lg.grad) EXPECT_TRUE(std::isfinite(g));
}

TEST(SigmaFreeze, Schedule) {
  const GmmLayout layout{2, 2};
  std::vector<double> g(layout.size(), 1.0);
  sigma_freeze(g, layout, 0, 5);
  for (int k = 0; k < 2; ++k) {
    for (int d = 0; d < 2; ++d) {
      EXPECT_EQ(g[layout.log_var(k, d)], 0.0);
      EXPECT_EQ(g[layout.mu(k, d)], 1.0);
    }
    EXPECT_EQ(g[k], 1.0);
  }
  std::vector<double> h(layout.size(), 1.0);
  sigma_freeze(h, layout, 5, 5);
  sigma_freeze(h, layout, 0, 0);
  for (double v : h) EXPECT_EQ(v, 1.0);
}

TEST(Selection, ArgmaxTieAndShiftInvariance) {
  const GmmLayout layout{2, 1};
  std::vector<double> raw{std::log(0.7), std::log(0.3), 5.0, -5.0, 0.0, 0.0};
  EXPECT_EQ(select_mode(raw, layout), 0);
  EXPECT_EQ(select_mode_mean(raw, layout), std::vector<double>{5.0});
  raw[0] = raw[1] = std::log(0.5);
  EXPECT_EQ(select_mode(raw, layout), 0);
  raw[0] = 0.1;
  raw[1] = 0.4;
  EXPECT_EQ(select_mode(raw, layout), 1);
  raw[0] += 100.0;
  raw[1] += 100.0;
  EXPECT_EQ(select_mode(raw, layout), 1);
}

TEST(Selection, TrajectoryIsInverseNormalized) {
  const GmmLayout layout{1, 4};
  std::vector<double> raw(layout.size(), 0.0);
  raw[layout.mu(0, 0)] = 1.0;
  raw[layout.mu(0, 3)] = -1.0;
  const Normalizer norm({3.0, 0.0, 6.0, 0.0}, {1.0, 0.5, 2.0, 0.5});
  const auto traj = select_trajectory(raw, layout, norm);
  ASSERT_EQ(traj.size(), 2u);
  EXPECT_DOUBLE_EQ(traj[0].x, 4.0);
  EXPECT_DOUBLE_EQ(traj[0].y, 0.0);
  EXPECT_DOUBLE_EQ(traj[1].x, 6.0);
  EXPECT_DOUBLE_EQ(traj[1].y, -0.5);
}

TEST(Mse, ValueAndGradient) {
  const LossAndGrad lg = mse_loss(std::vector<double>{1.0, 3.0}, std::vector<double>{0.0, 1.0});
  EXPECT_DOUBLE_EQ(lg.loss, 2.5);
  EXPECT_DOUBLE_EQ(lg.grad[0], 1.0);
  EXPECT_DOUBLE_EQ(lg.grad[1], 2.0);
}

TEST(MultiTask, Weights) {
  EXPECT_DOUBLE_EQ(multitask_loss(2.0, 3.0, {1.0, 0.0}), 2.0);
  EXPECT_DOUBLE_EQ(multitask_loss(2.0, 3.0, {1.0, 1.0}), 5.0);
  EXPECT_THROW((MultiTaskWeights{0.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((MultiTaskWeights{1.0, -1.0}.validate()), std::invalid_argument);
}

TEST(Cvar, OrderStatisticExamples) {
  const auto v = iota_losses(10);
  EXPECT_DOUBLE_EQ(cvar_estimate(v, 0.9), 10.0);
  EXPECT_DOUBLE_EQ(cvar_estimate(v, 0.0), 5.5);
  EXPECT_DOUBLE_EQ(cvar_estimate(std::vector<double>(7, 2.5), 0.9), 2.5);
  const auto mask = cvar_batch_mask(v, 0.9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(mask[i] != 0, i == 9);
  for (char c : cvar_batch_mask(v, 0.0)) EXPECT_TRUE(c);
}

TEST(Cvar, MatchesBruteForceAndMask) {
  Rng rng(31);
  for (int t = 0; t < 300; ++t) {
    const int n = uniform_int(rng, 10, 80);
    std::vector<double> v(n);
    for (double& x : v) x = t % 3 == 0 ? std::round(uniform(rng, 0.0, 4.0)) : uniform(rng, -3.0, 3.0);
    for (double alpha : {0.0, 0.25, 0.5, 0.9}) {
      if (static_cast<std::size_t>(n) < cvar_min_batch(alpha)) continue;
      const double est = cvar_estimate(v, alpha);
      EXPECT_NEAR(est, brute_cvar(v, alpha), 1e-12);
      const auto mask = cvar_batch_mask(v, alpha);
      double sum = 0.0;
      int cnt = 0;
      for (int i = 0; i < n; ++i) {
        if (mask[i]) {
          sum += v[i];
          ++cnt;
        }
      }
      EXPECT_NEAR(sum / cnt, est, 1e-12);
    }
  }
}

TEST(Cvar, MinimumBatch) {
  EXPECT_EQ(cvar_min_batch(0.9), 10u);
  EXPECT_EQ(cvar_min_batch(0.0), 1u);
  EXPECT_THROW(cvar_batch_mask(iota_losses(9), 0.9), std::invalid_argument);
  EXPECT_EQ(cvar_tail_rank(0.9, 10), 9u);
  EXPECT_EQ(cvar_tail_rank(0.0, 10), 0u);
}

TEST(Cvar, PercentileCurve) {
  const auto curve = cvar_percentile_curve(iota_losses(100));
  ASSERT_EQ(curve.size(), 20u);
  EXPECT_EQ(curve.front().percentile, 0);
  EXPECT_EQ(curve.back().percentile, 95);
  EXPECT_DOUBLE_EQ(curve[18].cvar, 95.5);
  for (const auto& p : cvar_percentile_curve(std::vector<double>(50, 3.0))) EXPECT_DOUBLE_EQ(p.cvar, 3.0);
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(uniform_int(rng, 20, 200));
    for (double& x : v) x = std::exp(uniform(rng, -2.0, 2.0));
    const auto c = cvar_percentile_curve(v);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i].cvar, c[i - 1].cvar);
  }
}

TEST(CvarGradient, QuadraticGaussian) {
  const CvarGradientReport r = mc_verify_cvar_gradient(1, 0.9, 1000000, 3);
  EXPECT_LT(r.relative_error, 0.01);
  // alpha = 0: the estimator is theta - mean(z).
  const CvarGradientReport r0 = mc_verify_cvar_gradient(2, 0.0, 200000, 3);
  for (int d = 0; d < 2; ++d) EXPECT_NEAR(r0.estimator[d], r0.theta[d], 0.01);
  EXPECT_LT(r0.relative_error, 0.01);
}

TEST(CvarGradient, StationaryPointOfEmpiricalCvar) {
  // The tail loss 0.5 (theta - z)^2 is minimized where the tail of |theta - z| is balanced;
  // by symmetry of N(0, 1) that is theta = 0, where the masked gradient vanishes.
  const CvarGradientReport r = mc_verify_cvar_gradient(1, 0.9, 1000000, 9, {0.0});
  // About 1e5 tail samples: Monte Carlo standard error near 0.006.
  EXPECT_LT(std::abs(r.estimator[0]), 0.03);
  const CvarGradientReport off = mc_verify_cvar_gradient(1, 0.9, 1000000, 9, {0.5});
  EXPECT_GT(std::abs(off.estimator[0]), 0.1);
}
