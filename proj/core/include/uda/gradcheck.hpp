#ifndef UDA_GRADCHECK_HPP
#define UDA_GRADCHECK_HPP

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uda/autodiff.hpp"
#include "uda/matrix.hpp"

namespace uda {

struct GradCheckReport {
  double max_rel_err = 0.0;
  int entries = 0;  // scalar derivatives compared
};

// Builds a fresh 1x1 graph from the current values of `inputs`. Must be a
// deterministic function of those values (freeze any random projections
// before wrapping them in the builder).
using ScalarFn = std::function<NodePtr(std::span<const NodePtr>)>;

// Central differences with step eps against the analytic gradients from
// backward(). Error per entry is |a - fd| / max(|a|, |fd|, 0.1): relative
// for large derivatives, absolute below 0.1 where difference noise would
// otherwise dominate.
GradCheckReport check_gradients(const ScalarFn& build,
                                std::span<const NodePtr> inputs,
                                double eps = 1e-4);

// Uniform draw over [-1, 1] with every entry at least `margin` from zero
// and all within-column gaps at least `margin`, so an eps-step never
// crosses a ReLU kink or flips a sort.
Matrix probe_matrix(int rows, int cols, Rng& rng, double margin = 1e-3);

struct GradSuiteEntry {
  std::string name;
  double max_rel_err = 0.0;
  int instances = 0;
};

// Canned finite-difference sweeps: every differentiable op and every
// training loss term, `instances` random cases each.
std::vector<GradSuiteEntry> gradcheck_suite(unsigned long long seed,
                                            int instances = 20);

}  // namespace uda

#endif
