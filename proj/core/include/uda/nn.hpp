#ifndef UDA_NN_HPP
#define UDA_NN_HPP

#include <span>
#include <vector>

#include "uda/autodiff.hpp"
#include "uda/matrix.hpp"

namespace uda {

/// Affine layer; weight in_dim x out_dim, bias 1 x out_dim. Weights start
/// uniform in +-sqrt(6 / (fan_in + fan_out)), biases at zero.
struct LinearLayer {
  NodePtr weight;
  NodePtr bias;

  LinearLayer(int in_dim, int out_dim, Rng& rng);
  NodePtr forward(const NodePtr& x) const;
};

/// Feature generator G: linear, ReLU, inverted dropout, linear.
struct GeneratorNet {
  LinearLayer layer1;
  LinearLayer layer2;
  double dropout_retain;

  GeneratorNet(int d_in, int d_hidden, int d_embed, double dropout_retain,
               Rng& rng);

  // Dropout masks come from `rng` and only when training; eval mode is a
  // pure function of weights and input.
  NodePtr forward(const NodePtr& x, bool training, Rng& rng) const;
  std::vector<NodePtr> params() const;
};

/// Neural classifier C_N: linear, ReLU, linear, row softmax.
struct NeuralClassifier {
  LinearLayer layer1;
  LinearLayer layer2;

  NeuralClassifier(int d_embed, int classes, Rng& rng);
  NodePtr forward(const NodePtr& z) const;  // probabilities
  std::vector<NodePtr> params() const;
};

/// Adam over a fixed parameter list. Frozen parameters (requires_grad off)
/// are skipped entirely: no value update, no moment decay.
struct AdamState {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  AdamState(std::span<const NodePtr> params, double lr);
  void step(std::span<const NodePtr> params);
};

void zero_grads(std::span<const NodePtr> params);
void set_requires_grad(std::span<const NodePtr> params, bool flag);

}  // namespace uda

#endif
