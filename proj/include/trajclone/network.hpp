#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajclone/random.hpp"

namespace trajclone {

enum class HeadKind { Gmm, Linear, Affordance, Actuation };
std::string to_string(HeadKind k);
HeadKind head_kind_from_string(const std::string& s);

struct HeadSpec {
  HeadKind kind = HeadKind::Linear;
  int dim = 10;   // target dimension
  int modes = 1;  // mixture components (GMM heads only)

  // GMM heads emit [log_pi (modes), mu (modes*dim), log_var (modes*dim)].
  int output_size() const { return kind == HeadKind::Gmm ? modes * (1 + 2 * dim) : dim; }
};

struct NetSpec {
  int input_dim = 20;
  std::vector<int> fusion_layers{128, 128, 64};
  std::vector<HeadSpec> heads;

  void validate() const;
  // Index of the first head of the given kind, or -1.
  int find_head(HeadKind kind) const;
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;  // row-major [out][in]
  std::size_t bias_offset = 0;
};

// Multilayer perceptron with rectifier fusion layers and linear heads on the last fusion output.
// All parameters live in one flat vector.
class Network {
 public:
  explicit Network(NetSpec spec);

  const NetSpec& spec() const { return spec_; }
  const std::vector<DenseLayer>& fusion() const { return fusion_; }
  const std::vector<DenseLayer>& heads() const { return heads_; }
  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  void set_params(std::vector<double> p);

  // Uniform fan-in scaled (He) weights, zero biases.
  void init_he_uniform(Rng& rng);

 private:
  NetSpec spec_;
  std::vector<DenseLayer> fusion_;
  std::vector<DenseLayer> heads_;
  std::vector<double> params_;
};

struct ForwardCache {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;   // fusion pre-activations
  std::vector<std::vector<double>> post;  // fusion activations
  std::vector<std::vector<double>> head_outputs;

  const std::vector<double>& features() const { return post.empty() ? input : post.back(); }
};

ForwardCache forward(const Network& net, std::span<const double> input);

// Accumulates d(loss)/d(params) into `grad`. head_grads[h] is the loss gradient w.r.t. head h's
// raw output; an empty vector means head h does not contribute.
void backward(const Network& net, const ForwardCache& cache, const std::vector<std::vector<double>>& head_grads,
              std::span<double> grad);
std::vector<double> backward(const Network& net, const ForwardCache& cache,
                             const std::vector<std::vector<double>>& head_grads);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam, no weight decay.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg);

// Rescales grads to max_norm when their L2 norm exceeds it. Returns the norm before clipping.
double clip_gradient_norm(std::span<double> grads, double max_norm);

class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> mean, std::vector<double> std);

  // Population statistics per dimension; throws on < 2 rows or a zero-variance dimension.
  // A positive min_std instead floors each std at that value.
  static Normalizer fit(const std::vector<std::vector<double>>& rows, double min_std = 0.0);

  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> invert(std::span<const double> z) const;
  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

}  // namespace trajclone
