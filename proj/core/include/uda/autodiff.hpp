#ifndef UDA_AUTODIFF_HPP
#define UDA_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "uda/matrix.hpp"

namespace uda {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Receives d(root)/d(out) and adds each parent's contribution into the
// matching slot. Slots for parents that do not require grad are null.
using BackwardFn = std::function<void(const Matrix& gout, std::span<Matrix* const> pgrads)>;

/// One vertex of a define-by-run differentiation graph. Graphs are rebuilt
/// every iteration; only leaves (parameters, probe inputs) persist across
/// iterations, carrying accumulated gradients until zero_grad.
struct Node {
  Matrix value;
  Matrix grad;  // accumulated; cleared only by zero_grad
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward_op;  // empty for leaves
  const char* op_name = "leaf";

  explicit Node(Matrix v, bool needs_grad = false)
      : value(std::move(v)),
        grad(value.rows(), value.cols()),
        requires_grad(needs_grad) {}

  void zero_grad() { grad.set_zero(); }
};

NodePtr make_leaf(Matrix value, bool requires_grad);
NodePtr make_const(Matrix value);  // leaf with requires_grad = false

NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);  // elementwise
NodePtr relu(const NodePtr& a);
NodePtr log(const NodePtr& a);  // strictly positive input
NodePtr exp(const NodePtr& a);
NodePtr scale(const NodePtr& a, double k);
NodePtr clamp_min(const NodePtr& a, double floor);

// bias must be 1 x a.cols; added to every row.
NodePtr add_rowvec(const NodePtr& a, const NodePtr& bias);

// Max-subtracted softmax per row; rows sum to 1, entries in (0, 1).
NodePtr row_softmax(const NodePtr& a);

// Each column sorted ascending (stable: ties keep original order). The
// forward permutation is frozen and gradients scatter back through it.
NodePtr sort_columns(const NodePtr& a);

NodePtr sum_all(const NodePtr& a);  // 1x1

// Mean of the selected rows, as a 1 x cols node. Indices must be in range
// and non-empty.
NodePtr mean_rows(const NodePtr& a, std::vector<int> indices);

// Euclidean norm over all entries, as 1x1. Subgradient at the origin is 0.
NodePtr l2_norm(const NodePtr& a);

// Each row divided by its Euclidean norm; a zero row is a domain error.
NodePtr row_l2_normalize(const NodePtr& a);

// root must be 1x1; adds d(root)/d(node) into grad of every reachable node
// with requires_grad. Repeated calls accumulate.
void backward(const NodePtr& root);

}  // namespace uda

#endif
