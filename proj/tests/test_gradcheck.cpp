#include <cmath>

#include "doctest.h"
#include "uda/gradcheck.hpp"
#include "uda/matrix.hpp"

using namespace uda;

TEST_SUITE_BEGIN("gradcheck");

TEST_CASE("probe matrices respect kink margins") {
  Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    Matrix m = probe_matrix(5, 3, rng);
    for (double v : m.data()) CHECK(std::abs(v) >= 1e-3);
    for (int j = 0; j < 3; ++j)
      for (int a = 0; a < 5; ++a)
        for (int b = a + 1; b < 5; ++b)
          CHECK(std::abs(m(a, j) - m(b, j)) >= 1e-3);
  }
}

TEST_CASE("harness agrees with a hand-differentiable function") {
  Rng rng(4);
  std::vector<NodePtr> in{make_leaf(probe_matrix(3, 3, rng), true)};
  auto rep = check_gradients(
      [](std::span<const NodePtr> x) { return scale(sum_all(mul(x[0], x[0])), 0.5); },
      in);
  CHECK(rep.entries == 9);
  CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("harness flags a kink sitting exactly on the probe point") {
  // relu at 0: analytic subgradient 0, centered difference 0.5.
  auto x = make_leaf(Matrix(1, 1), true);
  auto rep = check_gradients(
      [](std::span<const NodePtr> v) { return sum_all(relu(v[0])); },
      std::vector<NodePtr>{x});
  CHECK(rep.max_rel_err > 0.1);
}

TEST_CASE("full suite stays under tolerance") {
  auto entries = gradcheck_suite(20240817ULL, 20);
  CHECK(entries.size() >= 21);
  for (const auto& e : entries) {
    INFO(e.name);
    CHECK(e.instances == 20);
    CHECK(e.max_rel_err < 1e-4);
  }
}

TEST_SUITE_END();
