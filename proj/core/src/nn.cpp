#include "uda/nn.hpp"

#include <cmath>
#include <string>

#include "uda/errors.hpp"

namespace uda {

LinearLayer::LinearLayer(int in_dim, int out_dim, Rng& rng)
    : weight(make_leaf(Matrix(in_dim, out_dim), true)),
      bias(make_leaf(Matrix(1, out_dim), true)) {
  const double limit = std::sqrt(6.0 / (in_dim + out_dim));
  fill_uniform(weight->value, rng, -limit, limit);
}

NodePtr LinearLayer::forward(const NodePtr& x) const {
  return add_rowvec(matmul(x, weight), bias);
}

GeneratorNet::GeneratorNet(int d_in, int d_hidden, int d_embed,
                           double dropout_retain, Rng& rng)
    : layer1(d_in, d_hidden, rng),
      layer2(d_hidden, d_embed, rng),
      dropout_retain(dropout_retain) {
  if (dropout_retain <= 0.0 || dropout_retain > 1.0)
    throw domain_error("dropout retain probability must be in (0, 1], got " +
                       std::to_string(dropout_retain));
}

NodePtr GeneratorNet::forward(const NodePtr& x, bool training, Rng& rng) const {
  auto h = relu(layer1.forward(x));
  if (training && dropout_retain < 1.0) {
    Matrix mask(h->value.rows(), h->value.cols());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double& v : mask.data())
      v = unit(rng) < dropout_retain ? 1.0 / dropout_retain : 0.0;
    h = mul(h, make_const(mask));
  }
  return layer2.forward(h);
}

std::vector<NodePtr> GeneratorNet::params() const {
  return {layer1.weight, layer1.bias, layer2.weight, layer2.bias};
}

NeuralClassifier::NeuralClassifier(int d_embed, int classes, Rng& rng)
    : layer1(d_embed, d_embed, rng), layer2(d_embed, classes, rng) {}

NodePtr NeuralClassifier::forward(const NodePtr& z) const {
  return row_softmax(layer2.forward(relu(layer1.forward(z))));
}

std::vector<NodePtr> NeuralClassifier::params() const {
  return {layer1.weight, layer1.bias, layer2.weight, layer2.bias};
}

AdamState::AdamState(std::span<const NodePtr> params, double lr) : lr(lr) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p->value.rows(), p->value.cols());
    v.emplace_back(p->value.rows(), p->value.cols());
  }
}

void AdamState::step(std::span<const NodePtr> params) {
  if (params.size() != m.size())
    throw contract_error("adam: got " + std::to_string(params.size()) +
                         " params for " + std::to_string(m.size()) +
                         " moment slots");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Node& p = *params[k];
    if (!p.value.same_shape(m[k]))
      throw contract_error("adam: param " + std::to_string(k) + " shape " +
                           shape_string(p.value) + " does not match slot " +
                           shape_string(m[k]));
    if (!p.requires_grad) continue;
    auto pv = p.value.data();
    auto pg = p.grad.data();
    auto mk = m[k].data();
    auto vk = v[k].data();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double g = pg[i];
      mk[i] = beta1 * mk[i] + (1.0 - beta1) * g;
      vk[i] = beta2 * vk[i] + (1.0 - beta2) * g * g;
      const double mhat = mk[i] / bc1;
      const double vhat = vk[i] / bc2;
      pv[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void zero_grads(std::span<const NodePtr> params) {
  for (const auto& p : params) p->zero_grad();
}

void set_requires_grad(std::span<const NodePtr> params, bool flag) {
  for (const auto& p : params) p->requires_grad = flag;
}

}  // namespace uda
