#include "uda/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "uda/errors.hpp"

namespace uda {

namespace {

NodePtr op_node(Matrix value, std::vector<NodePtr> parents, const char* name,
                BackwardFn fn) {
  auto out = std::make_shared<Node>(std::move(value));
  for (const auto& p : parents)
    out->requires_grad = out->requires_grad || p->requires_grad;
  out->parents = std::move(parents);
  out->op_name = name;
  if (out->requires_grad) out->backward_op = std::move(fn);
  return out;
}

void check_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw dimension_error(std::string(op) + ": shapes " + shape_string(a) +
                          " and " + shape_string(b));
}

}  // namespace

NodePtr make_leaf(Matrix value, bool requires_grad) {
  return std::make_shared<Node>(std::move(value), requires_grad);
}

NodePtr make_const(Matrix value) { return make_leaf(std::move(value), false); }

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  Matrix value = matmul(a->value, b->value);
  return op_node(std::move(value), {a, b}, "matmul",
                 [a, b](const Matrix& g, std::span<Matrix* const> pg) {
                   if (pg[0]) add_inplace(*pg[0], matmul(g, transposed(b->value)));
                   if (pg[1]) add_inplace(*pg[1], matmul(transposed(a->value), g));
                 });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  check_same_shape("add", a->value, b->value);
  Matrix value = a->value;
  add_inplace(value, b->value);
  return op_node(std::move(value), {a, b}, "add",
                 [](const Matrix& g, std::span<Matrix* const> pg) {
                   if (pg[0]) add_inplace(*pg[0], g);
                   if (pg[1]) add_inplace(*pg[1], g);
                 });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  check_same_shape("sub", a->value, b->value);
  Matrix value = a->value;
  add_scaled_inplace(value, b->value, -1.0);
  return op_node(std::move(value), {a, b}, "sub",
                 [](const Matrix& g, std::span<Matrix* const> pg) {
                   if (pg[0]) add_inplace(*pg[0], g);
                   if (pg[1]) add_scaled_inplace(*pg[1], g, -1.0);
                 });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  check_same_shape("mul", a->value, b->value);
  Matrix value = a->value;
  {
    auto d = value.data();
    auto s = b->value.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= s[i];
  }
  return op_node(std::move(value), {a, b}, "mul",
                 [a, b](const Matrix& g, std::span<Matrix* const> pg) {
                   auto gd = g.data();
                   if (pg[0]) {
                     auto d = pg[0]->data();
                     auto s = b->value.data();
                     for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * s[i];
                   }
                   if (pg[1]) {
                     auto d = pg[1]->data();
                     auto s = a->value.data();
                     for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * s[i];
                   }
                 });
}

NodePtr relu(const NodePtr& a) {
  Matrix value = a->value;
  for (double& v : value.data()) v = v > 0.0 ? v : 0.0;
  return op_node(std::move(value), {a}, "relu",
                 [a](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   auto d = pg[0]->data();
                   auto s = a->value.data();
                   auto gd = g.data();
                   for (std::size_t i = 0; i < d.size(); ++i)
                     if (s[i] > 0.0) d[i] += gd[i];
                 });
}

NodePtr log(const NodePtr& a) {
  Matrix value = a->value;
  for (int r = 0; r < value.rows(); ++r)
    for (int c = 0; c < value.cols(); ++c) {
      if (value(r, c) <= 0.0)
        throw domain_error("log: non-positive entry at (" + std::to_string(r) +
                           ", " + std::to_string(c) + ")");
      value(r, c) = std::log(value(r, c));
    }
  return op_node(std::move(value), {a}, "log",
                 [a](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   auto d = pg[0]->data();
                   auto s = a->value.data();
                   auto gd = g.data();
                   for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] / s[i];
                 });
}

NodePtr exp(const NodePtr& a) {
  Matrix value = a->value;
  for (double& v : value.data()) v = std::exp(v);
  Matrix saved = value;
  return op_node(std::move(value), {a}, "exp",
                 [saved](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   auto d = pg[0]->data();
                   auto s = saved.data();
                   auto gd = g.data();
                   for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * s[i];
                 });
}

NodePtr scale(const NodePtr& a, double k) {
  Matrix value = a->value;
  for (double& v : value.data()) v *= k;
  return op_node(std::move(value), {a}, "scale",
                 [k](const Matrix& g, std::span<Matrix* const> pg) {
                   if (pg[0]) add_scaled_inplace(*pg[0], g, k);
                 });
}

NodePtr clamp_min(const NodePtr& a, double floor) {
  Matrix value = a->value;
  for (double& v : value.data()) v = v > floor ? v : floor;
  return op_node(std::move(value), {a}, "clamp_min",
                 [a, floor](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   auto d = pg[0]->data();
                   auto s = a->value.data();
                   auto gd = g.data();
                   for (std::size_t i = 0; i < d.size(); ++i)
                     if (s[i] > floor) d[i] += gd[i];
                 });
}

NodePtr add_rowvec(const NodePtr& a, const NodePtr& bias) {
  if (bias->value.rows() != 1 || bias->value.cols() != a->value.cols())
    throw dimension_error("add_rowvec: shapes " + shape_string(a->value) +
                          " and " + shape_string(bias->value));
  Matrix value = a->value;
  for (int r = 0; r < value.rows(); ++r)
    for (int c = 0; c < value.cols(); ++c) value(r, c) += bias->value(0, c);
  return op_node(std::move(value), {a, bias}, "add_rowvec",
                 [](const Matrix& g, std::span<Matrix* const> pg) {
                   if (pg[0]) add_inplace(*pg[0], g);
                   if (pg[1])
                     for (int r = 0; r < g.rows(); ++r)
                       for (int c = 0; c < g.cols(); ++c) (*pg[1])(0, c) += g(r, c);
                 });
}

NodePtr row_softmax(const NodePtr& a) {
  Matrix value = a->value;
  for (int r = 0; r < value.rows(); ++r) {
    double m = value(r, 0);
    for (int c = 1; c < value.cols(); ++c) m = std::max(m, value(r, c));
    double z = 0.0;
    for (int c = 0; c < value.cols(); ++c) {
      value(r, c) = std::exp(value(r, c) - m);
      z += value(r, c);
    }
    for (int c = 0; c < value.cols(); ++c) value(r, c) /= z;
  }
  Matrix probs = value;
  return op_node(std::move(value), {a}, "row_softmax",
                 [probs](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   for (int r = 0; r < g.rows(); ++r) {
                     double dot = 0.0;
                     for (int c = 0; c < g.cols(); ++c) dot += g(r, c) * probs(r, c);
                     for (int c = 0; c < g.cols(); ++c)
                       (*pg[0])(r, c) += probs(r, c) * (g(r, c) - dot);
                   }
                 });
}

NodePtr sort_columns(const NodePtr& a) {
  const int n = a->value.rows();
  const int c = a->value.cols();
  Matrix value(n, c);
  std::vector<int> perm(static_cast<std::size_t>(n) * c);
  std::vector<int> idx(n);
  for (int j = 0; j < c; ++j) {
    std::iota(idx.begin(), idx.end(), 0);
    const Matrix& in = a->value;
    std::stable_sort(idx.begin(), idx.end(),
                     [&in, j](int x, int y) { return in(x, j) < in(y, j); });
    for (int i = 0; i < n; ++i) {
      perm[static_cast<std::size_t>(j) * n + i] = idx[i];
      value(i, j) = in(idx[i], j);
    }
  }
  return op_node(std::move(value), {a}, "sort_columns",
                 [perm, n, c](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   for (int j = 0; j < c; ++j)
                     for (int i = 0; i < n; ++i)
                       (*pg[0])(perm[static_cast<std::size_t>(j) * n + i], j) +=
                           g(i, j);
                 });
}

NodePtr sum_all(const NodePtr& a) {
  Matrix value(1, 1);
  value(0, 0) = sum(a->value);
  return op_node(std::move(value), {a}, "sum_all",
                 [](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   const double gv = g(0, 0);
                   for (double& v : pg[0]->data()) v += gv;
                 });
}

NodePtr mean_rows(const NodePtr& a, std::vector<int> indices) {
  if (indices.empty()) throw domain_error("mean_rows: empty index set");
  for (int idx : indices)
    if (idx < 0 || idx >= a->value.rows())
      throw domain_error("mean_rows: row index " + std::to_string(idx) +
                         " out of range for " + shape_string(a->value));
  Matrix value = mean_of_rows(a->value, indices);
  const double inv = 1.0 / static_cast<double>(indices.size());
  return op_node(std::move(value), {a}, "mean_rows",
                 [indices, inv](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   for (int idx : indices)
                     for (int j = 0; j < g.cols(); ++j)
                       (*pg[0])(idx, j) += inv * g(0, j);
                 });
}

NodePtr l2_norm(const NodePtr& a) {
  double acc = 0.0;
  for (double v : a->value.data()) acc += v * v;
  const double norm = std::sqrt(acc);
  Matrix value(1, 1);
  value(0, 0) = norm;
  return op_node(std::move(value), {a}, "l2_norm",
                 [a, norm](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0] || norm == 0.0) return;
                   add_scaled_inplace(*pg[0], a->value, g(0, 0) / norm);
                 });
}

NodePtr row_l2_normalize(const NodePtr& a) {
  const int n = a->value.rows();
  const int c = a->value.cols();
  Matrix value = a->value;
  std::vector<double> norms(n);
  for (int r = 0; r < n; ++r) {
    const double nr = row_norm(value, r);
    if (nr == 0.0)
      throw domain_error("row_l2_normalize: zero row " + std::to_string(r));
    norms[r] = nr;
    for (int j = 0; j < c; ++j) value(r, j) /= nr;
  }
  Matrix unit = value;
  return op_node(std::move(value), {a}, "row_l2_normalize",
                 [unit, norms](const Matrix& g, std::span<Matrix* const> pg) {
                   if (!pg[0]) return;
                   for (int r = 0; r < g.rows(); ++r) {
                     double dot = 0.0;
                     for (int j = 0; j < g.cols(); ++j) dot += g(r, j) * unit(r, j);
                     for (int j = 0; j < g.cols(); ++j)
                       (*pg[0])(r, j) += (g(r, j) - dot * unit(r, j)) / norms[r];
                   }
                 });
}

void backward(const NodePtr& root) {
  if (!root) throw contract_error("backward: null root");
  if (root->value.rows() != 1 || root->value.cols() != 1)
    throw contract_error("backward: root must be 1x1, got " +
                         shape_string(root->value));

  // Post-order over parent edges: leaves first, root last.
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack;
  std::unordered_set<Node*> visited;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      Node* next = top.first->parents[top.second++].get();
      if (visited.insert(next).second) stack.emplace_back(next, 0);
    } else {
      order.push_back(top.first);
      stack.pop_back();
    }
  }

  // Per-call scratch gradients keep repeated backward calls exact: the
  // persistent grad fields receive one clean d(root)/d(node) each call.
  std::unordered_map<Node*, Matrix> scratch;
  scratch.reserve(order.size());
  for (Node* n : order)
    if (n->requires_grad) scratch.emplace(n, Matrix(n->value.rows(), n->value.cols()));
  if (!root->requires_grad) return;
  scratch.at(root.get())(0, 0) = 1.0;

  std::vector<Matrix*> slots;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->requires_grad) continue;
    const Matrix& g = scratch.at(n);
    if (n->backward_op) {
      slots.clear();
      for (const auto& p : n->parents) {
        auto found = scratch.find(p.get());
        slots.push_back(found == scratch.end() ? nullptr : &found->second);
      }
      n->backward_op(g, slots);
    }
    add_inplace(n->grad, g);
  }
}

}  // namespace uda
