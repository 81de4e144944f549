#include <gtest/gtest.h>

#include <cmath>

#include "trajclone/losses.hpp"
#include "trajclone/network.hpp"

using namespace trajclone;

namespace {

NetSpec small_spec(bool two_heads) {
  NetSpec s;
  s.input_dim = 4;
  s.fusion_layers = {6, 5};
  s.heads = {{HeadKind::Gmm, 3, 2}};
  if (two_heads) s.heads.push_back({HeadKind::Affordance, 2, 1});
  return s;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

// Straight-line oracle: explicit loops over the row-major layout.
std::vector<std::vector<double>> oracle_forward(const Network& net, const std::vector<double>& x) {
  const auto& p = net.params();
  auto dense = [&](const DenseLayer& l, const std::vector<double>& in, bool relu) {
    std::vector<double> out(static_cast<std::size_t>(l.out));
    for (int o = 0; o < l.out; ++o) {
      double acc = p[l.bias_offset + o];
      for (int i = 0; i < l.in; ++i) acc += p[l.weight_offset + static_cast<std::size_t>(o * l.in + i)] * in[i];
      out[o] = relu ? std::max(0.0, acc) : acc;
    }
    return out;
  };
  std::vector<double> h = x;
  for (const DenseLayer& l : net.fusion()) h = dense(l, h, true);
  std::vector<std::vector<double>> outs;
  for (const DenseLayer& l : net.heads()) outs.push_back(dense(l, h, false));
  return outs;
}

}  // namespace

TEST(Network, LayoutAndValidation) {
  const Network net(small_spec(true));
  const std::size_t expected = (4 * 6 + 6) + (6 * 5 + 5) + (5 * 14 + 14) + (5 * 2 + 2);
  EXPECT_EQ(net.num_params(), expected);
  NetSpec bad = small_spec(false);
  bad.heads.clear();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_EQ(small_spec(true).find_head(HeadKind::Affordance), 1);
  EXPECT_EQ(small_spec(false).find_head(HeadKind::Affordance), -1);
  EXPECT_EQ(head_kind_from_string(to_string(HeadKind::Actuation)), HeadKind::Actuation);
}

TEST(Network, ZeroParamsGiveZeroOutputs) {
  const Network net(small_spec(true));
  const ForwardCache c = forward(net, std::vector<double>{0.3, -2.0, 1.0, 5.0});
  for (const auto& h : c.head_outputs) {
    for (double v : h) EXPECT_EQ(v, 0.0);
  }
}

TEST(Network, IdentityLinearLayer) {
  NetSpec s;
  s.input_dim = 3;
  s.fusion_layers = {};
  s.heads = {{HeadKind::Linear, 3, 1}};
  Network net(s);
  for (int i = 0; i < 3; ++i) net.params()[net.heads()[0].weight_offset + static_cast<std::size_t>(i * 3 + i)] = 1.0;
  const std::vector<double> x{1.5, -2.0, 0.25};
  const ForwardCache c = forward(net, x);
  EXPECT_EQ(c.head_outputs[0], x);
}

TEST(Network, ForwardMatchesOracle) {
  Rng rng(4);
  Network net(small_spec(true));
  net.init_he_uniform(rng);
  for (double& p : net.params()) p += uniform(rng, -0.1, 0.1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> x = random_vec(rng, 4, -2.0, 2.0);
    const ForwardCache c = forward(net, x);
    const auto o = oracle_forward(net, x);
    for (std::size_t h = 0; h < o.size(); ++h) {
      for (std::size_t i = 0; i < o[h].size(); ++i) EXPECT_NEAR(c.head_outputs[h][i], o[h][i], 1e-12);
    }
  }
  EXPECT_THROW(forward(net, std::vector<double>{0.0, NAN, 0.0, 0.0}), std::invalid_argument);
}

TEST(Network, HeInitBoundsAndZeroBiases) {
  Rng rng(8);
  Network net(small_spec(false));
  net.init_he_uniform(rng);
  for (const DenseLayer& l : net.fusion()) {
    const double bound = std::sqrt(6.0 / l.in);
    for (int i = 0; i < l.in * l.out; ++i) EXPECT_LE(std::abs(net.params()[l.weight_offset + i]), bound);
    for (int i = 0; i < l.out; ++i) EXPECT_EQ(net.params()[l.bias_offset + i], 0.0);
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  Rng rng(2);
  Network net(small_spec(true));
  net.init_he_uniform(rng);
  const ForwardCache c = forward(net, random_vec(rng, 4));
  const auto g = backward(net, c, {std::vector<double>(14, 0.0), std::vector<double>(2, 0.0)});
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(6);
  Network net(small_spec(false));
  net.init_he_uniform(rng);
  for (double& p : net.params()) p += uniform(rng, -0.1, 0.1);
  const std::vector<double> x = random_vec(rng, 4, -1.5, 1.5);
  const std::vector<double> y = random_vec(rng, 3);
  const GmmLayout layout{2, 3};
  auto loss = [&]() { return gmm_nll(forward(net, x).head_outputs[0], y, layout).loss; };
  const ForwardCache c = forward(net, x);
  const auto analytic = backward(net, c, {gmm_nll(c.head_outputs[0], y, layout).grad});
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < net.num_params(); ++i) {
    const double p0 = net.params()[i];
    net.params()[i] = p0 + h;
    const double up = loss();
    net.params()[i] = p0 - h;
    const double down = loss();
    net.params()[i] = p0;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-4}));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Backward, TwoHeadsIsSumOfSingleHeads) {
  Rng rng(12);
  Network net(small_spec(true));
  net.init_he_uniform(rng);
  const ForwardCache c = forward(net, random_vec(rng, 4));
  const std::vector<double> g0 = random_vec(rng, 14), g1 = random_vec(rng, 2);
  const auto both = backward(net, c, {g0, g1});
  const auto a = backward(net, c, {g0, {}});
  const auto b = backward(net, c, {{}, g1});
  for (std::size_t i = 0; i < both.size(); ++i) EXPECT_NEAR(both[i], a[i] + b[i], 1e-12);
}

TEST(Adam, FirstStepClosedForm) {
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> g{0.3, -4.0, 1e-3};
  AdamState st(3);
  const AdamConfig cfg;
  adam_step(p, g, st, cfg);
  // Bias-corrected m = g, v = g^2 after one step.
  const std::vector<double> p0{1.0, -2.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(p[i], p0[i] - cfg.lr * g[i] / (std::abs(g[i]) + cfg.eps), 1e-15);
  }
}

TEST(Adam, ZeroGradientAndDeterminism) {
  std::vector<double> p{1.0, 2.0};
  AdamState st(2);
  for (int i = 0; i < 10; ++i) adam_step(p, std::vector<double>{0.0, 0.0}, st, AdamConfig{});
  EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));

  auto run = [] {
    Rng rng(77);
    std::vector<double> q(5, 0.1);
    AdamState s(5);
    for (int i = 0; i < 50; ++i) adam_step(q, random_vec(rng, 5), s, AdamConfig{});
    return q;
  };
  EXPECT_EQ(run(), run());
}

TEST(Clip, ScalesOnlyAboveTheLimit) {
  std::vector<double> g{6.0, 8.0};
  EXPECT_DOUBLE_EQ(clip_gradient_norm(g, 5.0), 10.0);
  EXPECT_NEAR(std::hypot(g[0], g[1]), 5.0, 1e-12);
  EXPECT_NEAR((g[0] * 6.0 + g[1] * 8.0) / (5.0 * 10.0), 1.0, 1e-12);
  std::vector<double> small{1.8, 2.4};
  EXPECT_DOUBLE_EQ(clip_gradient_norm(small, 5.0), 3.0);
  EXPECT_EQ(small, (std::vector<double>{1.8, 2.4}));
}

TEST(NormalizerTest, FitApplyInvert) {
  const std::vector<std::vector<double>> rows{{1.0, 10.0}, {3.0, 14.0}, {5.0, 18.0}};
  const Normalizer n = Normalizer::fit(rows);
  EXPECT_NEAR(n.mean()[0], 3.0, 1e-12);
  EXPECT_NEAR(n.stddev()[1], std::sqrt(32.0 / 3.0), 1e-12);
  const std::vector<double> x{2.2, -7.0};
  const auto back = n.invert(n.apply(x));
  EXPECT_NEAR(back[0], x[0], 1e-9);
  EXPECT_NEAR(back[1], x[1], 1e-9);
}

TEST(NormalizerTest, ZeroVarianceThrowsUnlessFloored) {
  const std::vector<std::vector<double>> rows{{1.0, 2.0}, {1.0, 3.0}};
  EXPECT_THROW(Normalizer::fit(rows), std::invalid_argument);
  const Normalizer n = Normalizer::fit(rows, 1e-3);
  EXPECT_EQ(n.stddev()[0], 1e-3);
  EXPECT_THROW(Normalizer::fit({{1.0}}), std::invalid_argument);
}
