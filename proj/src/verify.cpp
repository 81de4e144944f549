#include "trajclone/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "trajclone/losses.hpp"
#include "trajclone/network.hpp"

namespace trajclone {

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct GradDraw {
  Network net;
  std::vector<double> input;
  std::vector<std::vector<double>> targets;  // one per head
};

double draw_loss(const GradDraw& d, std::vector<std::vector<double>>* head_grads) {
  const ForwardCache c = forward(d.net, d.input);
  double total = 0.0;
  if (head_grads) head_grads->assign(d.net.heads().size(), {});
  for (std::size_t h = 0; h < d.net.heads().size(); ++h) {
    const HeadSpec& hs = d.net.spec().heads[h];
    LossAndGrad l = hs.kind == HeadKind::Gmm ? gmm_nll(c.head_outputs[h], d.targets[h], GmmLayout{hs.modes, hs.dim})
                                             : mse_loss(c.head_outputs[h], d.targets[h]);
    total += l.loss;
    if (head_grads) (*head_grads)[h] = std::move(l.grad);
  }
  return total;
}

bool near_kink(const Network& net, const std::vector<double>& input) {
  const ForwardCache c = forward(net, input);
  for (const auto& layer : c.pre) {
    for (double z : layer) {
      if (std::abs(z) < 1e-3) return true;
    }
  }
  return false;
}

}  // namespace

CheckResult check_network_gradients(int draws, std::uint64_t seed) {
  Stopwatch sw;
  CheckResult r{"network-gradient", true, 0.0, 1e-4, 0.0, ""};
  Rng rng = make_rng(seed, 0x6ad);
  constexpr double h = 1e-4;
  constexpr double floor = 1e-6;
  std::string worst;
  for (int k = 0; k < draws; ++k) {
    NetSpec spec;
    spec.input_dim = uniform_int(rng, 2, 6);
    spec.fusion_layers.clear();
    const int depth = uniform_int(rng, 1, 3);
    for (int i = 0; i < depth; ++i) spec.fusion_layers.push_back(uniform_int(rng, 3, 8));
    spec.heads.push_back({HeadKind::Gmm, uniform_int(rng, 1, 4), uniform_int(rng, 1, 3)});
    if (k % 2 == 1) spec.heads.push_back({HeadKind::Affordance, uniform_int(rng, 1, 4), 1});

    GradDraw d{Network(spec), {}, {}};
    d.net.init_he_uniform(rng);
    for (double& p : d.net.params()) p += uniform(rng, -0.1, 0.1);
    do {
      d.input.assign(static_cast<std::size_t>(spec.input_dim), 0.0);
      for (double& x : d.input) x = uniform(rng, -1.5, 1.5);
    } while (near_kink(d.net, d.input));
    for (const HeadSpec& hs : spec.heads) {
      std::vector<double> t(static_cast<std::size_t>(hs.dim));
      for (double& x : t) x = uniform(rng, -1.5, 1.5);
      d.targets.push_back(std::move(t));
    }

    std::vector<std::vector<double>> hg;
    draw_loss(d, &hg);
    const ForwardCache c = forward(d.net, d.input);
    const std::vector<double> analytic = backward(d.net, c, hg);

    for (std::size_t i = 0; i < d.net.num_params(); ++i) {
      const double p0 = d.net.params()[i];
      auto at = [&](double step) {
        d.net.params()[i] = p0 + step;
        return draw_loss(d, nullptr);
      };
      // Fourth-order central stencil.
      const double fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      d.net.params()[i] = p0;
      const double rel = std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), floor});
      if (rel > r.metric) {
        r.metric = rel;
        char buf[128];
        std::snprintf(buf, sizeof buf, "worst: draw %d param %zu analytic %.6g fd %.6g", k, i, analytic[i], fd);
        worst = buf;
      }
    }
  }
  r.passed = r.metric < r.tolerance;
  r.seconds = sw.seconds();
  r.detail = std::to_string(draws) + " random networks with a mixture head; " + worst;
  return r;
}

CheckResult check_gmm_oracle(int cases, std::uint64_t seed) {
  Stopwatch sw;
  CheckResult r{"gmm-direct-density", true, 0.0, 1e-10, 0.0, ""};
  Rng rng = make_rng(seed, 0x96e);
  const long double two_pi = 2.0L * 3.14159265358979323846264338327950288L;
  for (int c = 0; c < cases; ++c) {
    const GmmLayout layout{uniform_int(rng, 1, 3), uniform_int(rng, 1, 4)};
    std::vector<double> raw(layout.size());
    for (int k = 0; k < layout.modes; ++k) raw[static_cast<std::size_t>(k)] = uniform(rng, -2.0, 2.0);
    for (int k = 0; k < layout.modes; ++k) {
      for (int dd = 0; dd < layout.dim; ++dd) {
        raw[layout.mu(k, dd)] = uniform(rng, -2.0, 2.0);
        raw[layout.log_var(k, dd)] = uniform(rng, -1.0, 1.0);
      }
    }
    std::vector<double> y(static_cast<std::size_t>(layout.dim));
    for (double& v : y) v = uniform(rng, -2.0, 2.0);

    long double zsum = 0.0L;
    for (int k = 0; k < layout.modes; ++k) zsum += std::exp(static_cast<long double>(raw[static_cast<std::size_t>(k)]));
    long double density = 0.0L;
    for (int k = 0; k < layout.modes; ++k) {
      long double comp = std::exp(static_cast<long double>(raw[static_cast<std::size_t>(k)])) / zsum;
      for (int dd = 0; dd < layout.dim; ++dd) {
        const long double var = std::exp(static_cast<long double>(raw[layout.log_var(k, dd)]));
        const long double r0 = static_cast<long double>(y[static_cast<std::size_t>(dd)]) - raw[layout.mu(k, dd)];
        comp *= std::exp(-r0 * r0 / (2.0L * var)) / std::sqrt(two_pi * var);
      }
      density += comp;
    }
    const double expected = static_cast<double>(-std::log(density));
    const double got = gmm_nll(raw, y, layout).loss;
    r.metric = std::max(r.metric, std::abs(got - expected));
  }
  r.passed = r.metric < r.tolerance;
  r.seconds = sw.seconds();
  r.detail = std::to_string(cases) + " random mixtures (K <= 3, D <= 4)";
  return r;
}

CheckResult check_cvar_oracle(int vectors, std::uint64_t seed) {
  Stopwatch sw;
  CheckResult r{"cvar-order-statistics", true, 0.0, 1e-12, 0.0, ""};
  Rng rng = make_rng(seed, 0xcfa);
  bool mean_exact = true;
  bool monotone = true;
  for (int v = 0; v < vectors; ++v) {
    const std::size_t n = static_cast<std::size_t>(uniform_int(rng, 1, 1000));
    std::vector<double> L(n);
    const bool ties = v % 3 == 0;
    for (double& x : L) x = ties ? std::floor(uniform(rng, 0.0, 5.0)) : uniform(rng, -3.0, 10.0);
    const int p = 5 * uniform_int(rng, 0, 19);
    const double alpha = p / 100.0;

    // Sort-free oracle: nu is the value with count(< nu) < m <= count(<= nu).
    const std::size_t m = (static_cast<std::size_t>(p) * n + 99) / 100;
    double oracle = 0.0;
    if (m == 0) {
      for (double x : L) oracle += x;
      oracle /= static_cast<double>(n);
    } else {
      double nu = 0.0;
      for (double cand : L) {
        std::size_t lt = 0, le = 0;
        for (double x : L) {
          lt += x < cand;
          le += x <= cand;
        }
        if (lt < m && m <= le) {
          nu = cand;
          break;
        }
      }
      double sum = 0.0, mx = L.front();
      std::size_t cnt = 0;
      for (double x : L) {
        mx = std::max(mx, x);
        if (x > nu) {
          sum += x;
          ++cnt;
        }
      }
      oracle = cnt > 0 ? sum / static_cast<double>(cnt) : mx;
    }
    const double got = cvar_estimate(L, alpha);
    r.metric = std::max(r.metric, std::abs(got - oracle) / std::max(1.0, std::abs(oracle)));

    double mean = 0.0;
    for (double x : L) mean += x;
    mean /= static_cast<double>(n);
    if (cvar_estimate(L, 0.0) != mean) mean_exact = false;
    const std::vector<PercentilePoint> curve = cvar_percentile_curve(L);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      if (curve[i].cvar < curve[i - 1].cvar) monotone = false;
    }
  }
  r.passed = r.metric < r.tolerance && mean_exact && monotone;
  r.seconds = sw.seconds();
  std::ostringstream os;
  os << vectors << " random vectors; CVaR_0 == mean: " << (mean_exact ? "yes" : "no")
     << "; curves monotone: " << (monotone ? "yes" : "no");
  r.detail = os.str();
  return r;
}

CheckResult check_cvar_gradient(const std::vector<double>& alphas, std::size_t n_samples, std::uint64_t seed) {
  Stopwatch sw;
  CheckResult r{"cvar-gradient", true, 0.0, 0.01, 0.0, ""};
  std::ostringstream os;
  for (double a : alphas) {
    const CvarGradientReport rep = mc_verify_cvar_gradient(1, a, n_samples, seed);
    r.metric = std::max(r.metric, rep.relative_error);
    os << "alpha " << a << ": estimator " << rep.estimator[0] << " vs fd " << rep.finite_diff[0] << "; ";
  }
  r.passed = r.metric < r.tolerance;
  r.seconds = sw.seconds();
  r.detail = os.str();
  return r;
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed) {
  return {check_network_gradients(20, seed), check_gmm_oracle(100, seed), check_cvar_oracle(1000, seed),
          check_cvar_gradient({0.0, 0.5, 0.9}, 1000000, seed)};
}

}  // namespace trajclone
