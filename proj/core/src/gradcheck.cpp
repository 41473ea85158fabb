#include "uda/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "uda/errors.hpp"
#include "uda/losses.hpp"

namespace uda {

GradCheckReport check_gradients(const ScalarFn& build,
                                std::span<const NodePtr> inputs, double eps) {
  for (const auto& in : inputs) in->zero_grad();
  auto root = build(inputs);
  if (root->value.rows() != 1 || root->value.cols() != 1)
    throw contract_error("check_gradients: builder must return a 1x1 node");
  backward(root);

  std::vector<Matrix> analytic;
  analytic.reserve(inputs.size());
  for (const auto& in : inputs) analytic.push_back(in->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Matrix& v = inputs[k]->value;
    for (int r = 0; r < v.rows(); ++r)
      for (int c = 0; c < v.cols(); ++c) {
        const double saved = v(r, c);
        v(r, c) = saved + eps;
        const double fp = build(inputs)->value(0, 0);
        v(r, c) = saved - eps;
        const double fm = build(inputs)->value(0, 0);
        v(r, c) = saved;
        const double fd = (fp - fm) / (2.0 * eps);
        const double a = analytic[k](r, c);
        const double rel =
            std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 0.1});
        report.max_rel_err = std::max(report.max_rel_err, rel);
        ++report.entries;
      }
  }
  return report;
}

Matrix probe_matrix(int rows, int cols, Rng& rng, double margin) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    Matrix m(rows, cols);
    fill_uniform(m, rng, -1.0, 1.0);
    for (double& v : m.data())
      if (std::abs(v) < margin) v = v < 0.0 ? -margin : margin;

    bool ok = true;
    std::vector<double> col(rows);
    for (int j = 0; j < cols && ok; ++j) {
      for (int i = 0; i < rows; ++i) col[i] = m(i, j);
      std::sort(col.begin(), col.end());
      for (int i = 1; i < rows; ++i)
        if (col[i] - col[i - 1] < margin) {
          ok = false;
          break;
        }
    }
    if (ok) return m;
  }
  throw contract_error("probe_matrix: could not satisfy tie margins");
}

namespace {

// Weighted scalar readout so every output entry gets a distinct upstream
// gradient (a plain sum misses Jacobian structure, e.g. softmax rows).
NodePtr readout(const NodePtr& y, const Matrix& weights) {
  return sum_all(mul(y, make_const(weights)));
}

Matrix weight_like(int rows, int cols, Rng& rng) {
  Matrix w(rows, cols);
  fill_uniform(w, rng, -1.0, 1.0);
  return w;
}

struct Sweep {
  std::vector<GradSuiteEntry>& out;
  Rng& rng;
  int instances;

  void run(const std::string& name,
           const std::function<std::pair<std::vector<NodePtr>, ScalarFn>(Rng&)>&
               make_instance) {
    GradSuiteEntry entry{name, 0.0, instances};
    for (int i = 0; i < instances; ++i) {
      auto [inputs, build] = make_instance(rng);
      auto rep = check_gradients(build, inputs);
      entry.max_rel_err = std::max(entry.max_rel_err, rep.max_rel_err);
    }
    out.push_back(entry);
  }
};

// Smallest gap between values within any column; sort kinks live there.
double min_column_gap(const Matrix& m) {
  double gap = 1e300;
  std::vector<double> col(m.rows());
  for (int j = 0; j < m.cols(); ++j) {
    for (int i = 0; i < m.rows(); ++i) col[i] = m(i, j);
    std::sort(col.begin(), col.end());
    for (int i = 1; i < m.rows(); ++i) gap = std::min(gap, col[i] - col[i - 1]);
  }
  return gap;
}

}  // namespace

std::vector<GradSuiteEntry> gradcheck_suite(unsigned long long seed,
                                            int instances) {
  std::vector<GradSuiteEntry> out;
  Rng rng(seed);
  Sweep sweep{out, rng, instances};

  sweep.run("matmul", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(3, 4, r), true),
                            make_leaf(probe_matrix(4, 2, r), true)};
    Matrix w = weight_like(3, 2, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(matmul(x[0], x[1]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("add", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(3, 4, r), true),
                            make_leaf(probe_matrix(3, 4, r), true)};
    Matrix w = weight_like(3, 4, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(add(x[0], x[1]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("sub", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(3, 4, r), true),
                            make_leaf(probe_matrix(3, 4, r), true)};
    Matrix w = weight_like(3, 4, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(sub(x[0], x[1]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("mul", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(3, 4, r), true),
                            make_leaf(probe_matrix(3, 4, r), true)};
    Matrix w = weight_like(3, 4, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(mul(x[0], x[1]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("relu", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(4, 3, r), true)};
    Matrix w = weight_like(4, 3, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(relu(x[0]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("log", [](Rng& r) {
    Matrix m = probe_matrix(4, 3, r);
    for (double& v : m.data()) v += 1.5;  // keep strictly positive
    std::vector<NodePtr> in{make_leaf(m, true)};
    Matrix w = weight_like(4, 3, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(log(x[0]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("exp", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(4, 3, r), true)};
    Matrix w = weight_like(4, 3, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(exp(x[0]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("scale", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(4, 3, r), true)};
    Matrix w = weight_like(4, 3, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(scale(x[0], -1.7), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("clamp_min", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(4, 3, r), true)};
    Matrix w = weight_like(4, 3, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(clamp_min(x[0], 0.0), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("add_rowvec", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(4, 3, r), true),
                            make_leaf(probe_matrix(1, 3, r), true)};
    Matrix w = weight_like(4, 3, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(add_rowvec(x[0], x[1]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("row_softmax", [](Rng& r) {
    Matrix m = probe_matrix(3, 4, r);
    for (double& v : m.data()) v *= 3.0;  // widen the logit spread
    std::vector<NodePtr> in{make_leaf(m, true)};
    Matrix w = weight_like(3, 4, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(row_softmax(x[0]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("sort_columns", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(5, 3, r), true)};
    Matrix w = weight_like(5, 3, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(sort_columns(x[0]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("sum_all", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(4, 3, r), true)};
    ScalarFn f = [](std::span<const NodePtr> x) {
      return scale(sum_all(x[0]), 1.3);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("mean_rows", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(5, 3, r), true)};
    Matrix w = weight_like(1, 3, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(mean_rows(x[0], {0, 2, 3}), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("l2_norm", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(1, 5, r), true)};
    ScalarFn f = [](std::span<const NodePtr> x) {
      return scale(l2_norm(x[0]), 0.7);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("row_l2_normalize", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(3, 4, r), true)};
    Matrix w = weight_like(3, 4, r);
    ScalarFn f = [w](std::span<const NodePtr> x) {
      return readout(row_l2_normalize(x[0]), w);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("mlp_chain", [](Rng& r) {
    std::vector<NodePtr> in{
        make_leaf(probe_matrix(3, 5, r), true),  // x
        make_leaf(probe_matrix(5, 4, r), true),  // w1
        make_leaf(probe_matrix(1, 4, r), true),  // b1
        make_leaf(probe_matrix(4, 3, r), true),  // w2
        make_leaf(probe_matrix(1, 3, r), true),  // b2
    };
    std::vector<int> labels{0, 2, 1};
    ScalarFn f = [labels](std::span<const NodePtr> x) {
      auto h = relu(add_rowvec(matmul(x[0], x[1]), x[2]));
      auto p = row_softmax(add_rowvec(matmul(h, x[3]), x[4]));
      Matrix mask(3, 3);
      for (int i = 0; i < 3; ++i) mask(i, labels[i]) = 1.0;
      auto picked = mul(make_const(mask), log(clamp_min(p, 1e-12)));
      return scale(sum_all(picked), -1.0 / 3.0);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("loss_source", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(4, 3, r), true),
                            make_leaf(probe_matrix(4, 3, r), true)};
    std::vector<int> labels{0, 2, 1, 1};
    ScalarFn f = [labels](std::span<const NodePtr> x) {
      return source_loss(row_softmax(x[0]), row_softmax(x[1]), labels);
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("loss_dis", [](Rng& r) {
    // Redraw until the projected columns carry no near-ties: the criterion
    // only covers inputs at least 1e-3 away from sort kinks.
    for (int attempt = 0; attempt < 200; ++attempt) {
      Matrix a = probe_matrix(5, 3, r);
      Matrix b = probe_matrix(5, 3, r);
      Matrix dirs = draw_projections(3, 8, r);
      Matrix pa = matmul(row_softmax(make_const(a))->value, dirs);
      Matrix pb = matmul(row_softmax(make_const(b))->value, dirs);
      if (min_column_gap(pa) < 1e-3 || min_column_gap(pb) < 1e-3) continue;
      std::vector<NodePtr> in{make_leaf(a, true), make_leaf(b, true)};
      ScalarFn f = [dirs](std::span<const NodePtr> x) {
        return swd(row_softmax(x[0]), row_softmax(x[1]), dirs);
      };
      return std::pair(std::move(in), std::move(f));
    }
    throw contract_error("loss_dis sweep: could not avoid sort ties");
  });

  sweep.run("loss_align_c", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(6, 4, r), true),
                            make_leaf(probe_matrix(6, 4, r), true)};
    std::vector<int> y_s{0, 0, 1, 1, 2, 2};
    ConfidentSubset subset;
    subset.indices = {0, 1, 2, 3, 4, 5};
    subset.labels = {0, 1, 1, 2, 0, 2};
    subset.classes_present = {0, 1, 2};
    ScalarFn f = [y_s, subset](std::span<const NodePtr> x) {
      return alignment_loss(x[0], y_s, x[1], subset).l_c;
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("loss_align_d", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(6, 4, r), true),
                            make_leaf(probe_matrix(6, 4, r), true)};
    std::vector<int> y_s{0, 0, 1, 1, 2, 2};
    ConfidentSubset subset;
    subset.indices = {0, 1, 2, 3, 4, 5};
    subset.labels = {0, 1, 1, 2, 0, 2};
    subset.classes_present = {0, 1, 2};
    ScalarFn f = [y_s, subset](std::span<const NodePtr> x) {
      return alignment_loss(x[0], y_s, x[1], subset).l_d;
    };
    return std::pair(std::move(in), std::move(f));
  });

  sweep.run("loss_em", [](Rng& r) {
    std::vector<NodePtr> in{make_leaf(probe_matrix(4, 3, r), true),
                            make_leaf(probe_matrix(4, 3, r), true)};
    ScalarFn f = [](std::span<const NodePtr> x) {
      return entropy_loss(row_softmax(x[0]), row_softmax(x[1]));
    };
    return std::pair(std::move(in), std::move(f));
  });

  return out;
}

}  // namespace uda
