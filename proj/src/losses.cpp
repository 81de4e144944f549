#include "trajclone/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace trajclone {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  const double lse = log_sum_exp(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

LossAndGrad gmm_nll(std::span<const double> raw, std::span<const double> target, const GmmLayout& layout) {
  const int K = layout.modes;
  const int D = layout.dim;
  if (K < 1 || D < 1) throw std::invalid_argument("gmm_nll: modes and dim must be positive");
  if (raw.size() != layout.size()) throw std::invalid_argument("gmm_nll: head output has the wrong size");
  if (target.size() != static_cast<std::size_t>(D)) throw std::invalid_argument("gmm_nll: target has the wrong size");

  std::span<const double> logits = raw.first(static_cast<std::size_t>(K));
  const double lse_pi = log_sum_exp(logits);

  // comp[k] = log pi_k + log N(y | mu_k, sigma_k^2)
  std::vector<double> comp(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    double q = 0.0;
    for (int d = 0; d < D; ++d) {
      const double lv = raw[layout.log_var(k, d)];
      const double r = target[static_cast<std::size_t>(d)] - raw[layout.mu(k, d)];
      q += r * r * std::exp(-lv) + lv + kLog2Pi;
    }
    comp[static_cast<std::size_t>(k)] = logits[static_cast<std::size_t>(k)] - lse_pi - 0.5 * q;
  }
  const double lse = log_sum_exp(comp);

  LossAndGrad out;
  out.loss = -lse;
  out.grad.assign(raw.size(), 0.0);
  for (int k = 0; k < K; ++k) {
    const double gamma = std::exp(comp[static_cast<std::size_t>(k)] - lse);
    const double pi = std::exp(logits[static_cast<std::size_t>(k)] - lse_pi);
    out.grad[static_cast<std::size_t>(k)] = pi - gamma;
    for (int d = 0; d < D; ++d) {
      const double inv_var = std::exp(-raw[layout.log_var(k, d)]);
      const double r = target[static_cast<std::size_t>(d)] - raw[layout.mu(k, d)];
      out.grad[layout.mu(k, d)] = -gamma * r * inv_var;
      out.grad[layout.log_var(k, d)] = 0.5 * gamma * (1.0 - r * r * inv_var);
    }
  }
  return out;
}

void sigma_freeze(std::span<double> grad, const GmmLayout& layout, int epoch, int freeze_epochs) {
  if (grad.size() != layout.size()) throw std::invalid_argument("sigma_freeze: gradient has the wrong size");
  if (epoch >= freeze_epochs) return;
  const std::size_t begin = layout.log_var(0, 0);
  std::fill(grad.begin() + static_cast<std::ptrdiff_t>(begin), grad.end(), 0.0);
}

int select_mode(std::span<const double> raw, const GmmLayout& layout) {
  if (raw.size() != layout.size()) throw std::invalid_argument("select_mode: head output has the wrong size");
  int best = 0;
  for (int k = 1; k < layout.modes; ++k) {
    if (raw[static_cast<std::size_t>(k)] > raw[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

std::vector<double> select_mode_mean(std::span<const double> raw, const GmmLayout& layout) {
  const int k = select_mode(raw, layout);
  std::vector<double> mu(static_cast<std::size_t>(layout.dim));
  for (int d = 0; d < layout.dim; ++d) mu[static_cast<std::size_t>(d)] = raw[layout.mu(k, d)];
  return mu;
}

std::vector<Vec2> select_trajectory(std::span<const double> raw, const GmmLayout& layout, const Normalizer& norm) {
  const std::vector<double> flat = norm.invert(select_mode_mean(raw, layout));
  std::vector<Vec2> traj(flat.size() / 2);
  for (std::size_t i = 0; i < traj.size(); ++i) traj[i] = {flat[2 * i], flat[2 * i + 1]};
  return traj;
}

LossAndGrad mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw std::invalid_argument("mse_loss: size mismatch");
  const double n = static_cast<double>(pred.size());
  LossAndGrad out;
  out.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    out.loss += r * r;
    out.grad[i] = 2.0 * r / n;
  }
  out.loss /= n;
  return out;
}

void MultiTaskWeights::validate() const {
  if (!(w_traj > 0.0)) throw std::invalid_argument("w_traj must be positive");
  if (!(w_aff >= 0.0)) throw std::invalid_argument("w_aff must be nonnegative");
}

double multitask_loss(double traj_loss, double aff_loss, const MultiTaskWeights& w) {
  w.validate();
  return w.w_traj * traj_loss + w.w_aff * aff_loss;
}

std::size_t cvar_tail_rank(double alpha, std::size_t n) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
  const double x = alpha * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

std::vector<char> cvar_tail_mask(std::span<const double> losses, std::size_t m, std::size_t fallback) {
  const std::size_t n = losses.size();
  if (n == 0) throw std::invalid_argument("CVaR of an empty loss vector");
  if (m > n) throw std::invalid_argument("tail rank exceeds sample count");
  std::vector<char> mask(n, 0);
  if (m == 0) {
    std::fill(mask.begin(), mask.end(), 1);
    return mask;
  }
  std::vector<double> sorted(losses.begin(), losses.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(m - 1), sorted.end());
  const double nu = sorted[m - 1];
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (losses[i] > nu) {
      mask[i] = 1;
      any = true;
    }
  }
  if (any) return mask;

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
  const std::size_t take = std::clamp<std::size_t>(fallback, 1, n);
  for (std::size_t i = 0; i < take; ++i) mask[idx[i]] = 1;
  return mask;
}

namespace {

double masked_mean(std::span<const double> losses, const std::vector<char>& mask) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (mask[i]) {
      sum += losses[i];
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

std::vector<char> alpha_mask(std::span<const double> losses, double alpha) {
  const std::size_t n = losses.size();
  const std::size_t m = cvar_tail_rank(alpha, n);
  return cvar_tail_mask(losses, m, n - std::min(n, static_cast<std::size_t>(std::floor(alpha * n + 1e-9))));
}

}  // namespace

double cvar_estimate(std::span<const double> losses, double alpha) {
  if (losses.empty()) throw std::invalid_argument("CVaR of an empty loss vector");
  return masked_mean(losses, alpha_mask(losses, alpha));
}

std::size_t cvar_min_batch(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
  const double x = 1.0 / (1.0 - alpha);
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * x));
}

std::vector<char> cvar_batch_mask(std::span<const double> losses, double alpha) {
  const std::size_t need = cvar_min_batch(alpha);
  if (losses.size() < need) {
    throw std::invalid_argument("CVaR batch of " + std::to_string(losses.size()) + " samples is too small for alpha " +
                                std::to_string(alpha) + "; use a batch size of at least " + std::to_string(need));
  }
  return alpha_mask(losses, alpha);
}

std::vector<PercentilePoint> cvar_percentile_curve(std::span<const double> losses) {
  const std::size_t n = losses.size();
  if (n == 0) throw std::invalid_argument("CVaR of an empty loss vector");
  std::vector<PercentilePoint> curve;
  for (int p = 0; p < 100; p += 5) {
    const std::size_t up = static_cast<std::size_t>(p) * n;
    const std::size_t m = (up + 99) / 100;
    const std::size_t fallback = n - up / 100;
    curve.push_back({p, masked_mean(losses, cvar_tail_mask(losses, m, fallback))});
  }
  return curve;
}

CvarGradientReport mc_verify_cvar_gradient(int dimension, double alpha, std::size_t n_samples, std::uint64_t seed,
                                           std::vector<double> theta) {
  if (dimension < 1) throw std::invalid_argument("dimension must be positive");
  if (n_samples < cvar_min_batch(alpha)) throw std::invalid_argument("too few samples for alpha");
  const std::size_t D = static_cast<std::size_t>(dimension);
  if (theta.empty()) theta.assign(D, 1.0);
  if (theta.size() != D) throw std::invalid_argument("theta has the wrong dimension");

  Rng rng = make_rng(seed, 0xc0a7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(n_samples * D);
  for (double& v : z) v = normal(rng);

  auto losses_at = [&](const std::vector<double>& th) {
    std::vector<double> L(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        const double r = th[d] - z[i * D + d];
        s += r * r;
      }
      L[i] = 0.5 * s;
    }
    return L;
  };

  CvarGradientReport rep;
  rep.dimension = dimension;
  rep.alpha = alpha;
  rep.n_samples = n_samples;
  rep.theta = theta;

  const std::vector<double> L = losses_at(theta);
  const std::vector<char> mask = cvar_batch_mask(L, alpha);
  rep.estimator.assign(D, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (!mask[i]) continue;
    ++count;
    for (std::size_t d = 0; d < D; ++d) rep.estimator[d] += theta[d] - z[i * D + d];
  }
  for (double& g : rep.estimator) g /= static_cast<double>(count);

  const double h = 1e-4;
  rep.finite_diff.assign(D, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> tp = theta, tm = theta;
    tp[d] += h;
    tm[d] -= h;
    rep.finite_diff[d] = (cvar_estimate(losses_at(tp), alpha) - cvar_estimate(losses_at(tm), alpha)) / (2.0 * h);
  }

  double num = 0.0, den = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    num += (rep.estimator[d] - rep.finite_diff[d]) * (rep.estimator[d] - rep.finite_diff[d]);
    den += rep.finite_diff[d] * rep.finite_diff[d];
  }
  rep.relative_error = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
  return rep;
}

}  // namespace trajclone
