#include "trajclone/network.hpp"

#include <algorithm>
#include <cmath>

namespace trajclone {

std::string to_string(HeadKind k) {
  switch (k) {
    case HeadKind::Gmm: return "gmm";
    case HeadKind::Linear: return "linear";
    case HeadKind::Affordance: return "affordance";
    case HeadKind::Actuation: return "actuation";
  }
  return "?";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "gmm") return HeadKind::Gmm;
  if (s == "linear") return HeadKind::Linear;
  if (s == "affordance") return HeadKind::Affordance;
  if (s == "actuation") return HeadKind::Actuation;
  throw std::invalid_argument("unknown head kind '" + s + "'");
}

void NetSpec::validate() const {
  if (input_dim <= 0) throw std::invalid_argument("input_dim must be positive");
  for (int w : fusion_layers) {
    if (w <= 0) throw std::invalid_argument("fusion layer widths must be positive");
  }
  if (heads.empty()) throw std::invalid_argument("network needs at least one head");
  bool predicts = false;
  for (const HeadSpec& h : heads) {
    if (h.dim <= 0) throw std::invalid_argument("head dimension must be positive");
    if (h.kind == HeadKind::Gmm && h.modes < 1) throw std::invalid_argument("GMM head needs at least one mode");
    if (h.kind == HeadKind::Gmm || h.kind == HeadKind::Linear || h.kind == HeadKind::Actuation) predicts = true;
  }
  if (!predicts) throw std::invalid_argument("network needs a trajectory or actuation head");
}

int NetSpec::find_head(HeadKind kind) const {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (heads[i].kind == kind) return static_cast<int>(i);
  }
  return -1;
}

Network::Network(NetSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  auto add = [&](int in, int out) {
    DenseLayer l{in, out, offset, offset + static_cast<std::size_t>(in) * static_cast<std::size_t>(out)};
    offset = l.bias_offset + static_cast<std::size_t>(out);
    return l;
  };
  int width = spec_.input_dim;
  for (int w : spec_.fusion_layers) {
    fusion_.push_back(add(width, w));
    width = w;
  }
  for (const HeadSpec& h : spec_.heads) heads_.push_back(add(width, h.output_size()));
  params_.assign(offset, 0.0);
}

void Network::set_params(std::vector<double> p) {
  if (p.size() != params_.size()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(p.size()) + " entries, expected " +
                                std::to_string(params_.size()));
  }
  params_ = std::move(p);
}

void Network::init_he_uniform(Rng& rng) {
  auto init = [&](const DenseLayer& l) {
    const double bound = std::sqrt(6.0 / l.in);
    for (std::size_t i = 0; i < static_cast<std::size_t>(l.in) * l.out; ++i) {
      params_[l.weight_offset + i] = uniform(rng, -bound, bound);
    }
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(l.bias_offset), l.out, 0.0);
  };
  for (const DenseLayer& l : fusion_) init(l);
  for (const DenseLayer& l : heads_) init(l);
}

namespace {

void dense_forward(const std::vector<double>& p, const DenseLayer& l, std::span<const double> x,
                   std::vector<double>& z) {
  z.resize(static_cast<std::size_t>(l.out));
  for (int o = 0; o < l.out; ++o) {
    const double* w = p.data() + l.weight_offset + static_cast<std::size_t>(o) * l.in;
    double acc = p[l.bias_offset + static_cast<std::size_t>(o)];
    for (int i = 0; i < l.in; ++i) acc += w[i] * x[static_cast<std::size_t>(i)];
    z[static_cast<std::size_t>(o)] = acc;
  }
}

// Accumulates weight/bias gradients and, when dx is non-null, adds the input gradient.
void dense_backward(const std::vector<double>& p, const DenseLayer& l, std::span<const double> x,
                    std::span<const double> dz, std::span<double> grad, std::vector<double>* dx) {
  for (int o = 0; o < l.out; ++o) {
    const double g = dz[static_cast<std::size_t>(o)];
    if (g == 0.0) continue;
    grad[l.bias_offset + static_cast<std::size_t>(o)] += g;
    double* gw = grad.data() + l.weight_offset + static_cast<std::size_t>(o) * l.in;
    for (int i = 0; i < l.in; ++i) gw[i] += g * x[static_cast<std::size_t>(i)];
    if (dx != nullptr) {
      const double* w = p.data() + l.weight_offset + static_cast<std::size_t>(o) * l.in;
      for (int i = 0; i < l.in; ++i) (*dx)[static_cast<std::size_t>(i)] += g * w[i];
    }
  }
}

}  // namespace

ForwardCache forward(const Network& net, std::span<const double> input) {
  if (input.size() != static_cast<std::size_t>(net.spec().input_dim)) {
    throw std::invalid_argument("input has " + std::to_string(input.size()) + " entries, expected " +
                                std::to_string(net.spec().input_dim));
  }
  for (double v : input) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite network input");
  }
  ForwardCache c;
  c.input.assign(input.begin(), input.end());
  const auto& p = net.params();
  c.pre.resize(net.fusion().size());
  c.post.resize(net.fusion().size());
  for (std::size_t li = 0; li < net.fusion().size(); ++li) {
    const std::vector<double>& x = li == 0 ? c.input : c.post[li - 1];
    dense_forward(p, net.fusion()[li], x, c.pre[li]);
    c.post[li].resize(c.pre[li].size());
    std::transform(c.pre[li].begin(), c.pre[li].end(), c.post[li].begin(), [](double z) { return z > 0.0 ? z : 0.0; });
  }
  c.head_outputs.resize(net.heads().size());
  for (std::size_t h = 0; h < net.heads().size(); ++h) dense_forward(p, net.heads()[h], c.features(), c.head_outputs[h]);
  return c;
}

void backward(const Network& net, const ForwardCache& cache, const std::vector<std::vector<double>>& head_grads,
              std::span<double> grad) {
  if (grad.size() != net.num_params()) throw std::invalid_argument("gradient buffer has the wrong size");
  if (head_grads.size() != net.heads().size()) throw std::invalid_argument("one gradient entry per head required");
  const auto& p = net.params();
  const std::vector<double>& feat = cache.features();
  std::vector<double> dfeat(feat.size(), 0.0);
  const bool need_dfeat = !net.fusion().empty();
  for (std::size_t h = 0; h < net.heads().size(); ++h) {
    if (head_grads[h].empty()) continue;
    if (head_grads[h].size() != static_cast<std::size_t>(net.heads()[h].out)) {
      throw std::invalid_argument("gradient for head " + std::to_string(h) + " has the wrong size");
    }
    dense_backward(p, net.heads()[h], feat, head_grads[h], grad, need_dfeat ? &dfeat : nullptr);
  }
  std::vector<double> dz;
  for (std::size_t li = net.fusion().size(); li-- > 0;) {
    dz.resize(dfeat.size());
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = cache.pre[li][i] > 0.0 ? dfeat[i] : 0.0;
    const std::vector<double>& x = li == 0 ? cache.input : cache.post[li - 1];
    std::vector<double> dx;
    if (li > 0) dx.assign(x.size(), 0.0);
    dense_backward(p, net.fusion()[li], x, dz, grad, li > 0 ? &dx : nullptr);
    dfeat = std::move(dx);
  }
}

std::vector<double> backward(const Network& net, const ForwardCache& cache,
                             const std::vector<std::vector<double>>& head_grads) {
  std::vector<double> g(net.num_params(), 0.0);
  backward(net, cache, head_grads, g);
  return g;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

double clip_gradient_norm(std::span<double> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be positive");
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double n = std::sqrt(sq);
  if (n > max_norm) {
    const double scale = max_norm / n;
    for (double& g : grads) g *= scale;
  }
  return n;
}

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> std) : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size()) throw std::invalid_argument("normalizer mean/std size mismatch");
  for (std::size_t i = 0; i < std_.size(); ++i) {
    if (!(std_[i] > 0.0)) throw std::invalid_argument("normalizer std must be positive in dimension " + std::to_string(i));
  }
}

Normalizer Normalizer::fit(const std::vector<std::vector<double>>& rows, double min_std) {
  if (rows.size() < 2) throw std::invalid_argument("normalizer needs at least 2 samples");
  const std::size_t d = rows.front().size();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("normalizer rows have inconsistent dimension");
    for (std::size_t i = 0; i < d; ++i) mean[i] += r[i];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) var[i] += (r[i] - mean[i]) * (r[i] - mean[i]);
  }
  std::vector<double> sd(d);
  for (std::size_t i = 0; i < d; ++i) {
    sd[i] = std::sqrt(var[i] / static_cast<double>(rows.size()));
    if (min_std > 0.0) {
      sd[i] = std::max(sd[i], min_std);
      continue;
    }
    if (!(sd[i] > 1e-12 * std::max(1.0, std::abs(mean[i])))) {
      throw std::invalid_argument("dimension " + std::to_string(i) + " has zero variance");
    }
  }
  return Normalizer(std::move(mean), std::move(sd));
}

std::vector<double> Normalizer::apply(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("normalizer dimension mismatch");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean_[i]) / std_[i];
  return z;
}

std::vector<double> Normalizer::invert(std::span<const double> z) const {
  if (z.size() != mean_.size()) throw std::invalid_argument("normalizer dimension mismatch");
  std::vector<double> x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] * std_[i] + mean_[i];
  return x;
}

}  // namespace trajclone
