#include "uda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uda/errors.hpp"

namespace uda {

namespace {

constexpr double kLogFloor = 1e-12;

// -(1/n) sum of mask-selected log-probabilities.
NodePtr masked_cross_entropy(const NodePtr& probs, const Matrix& mask) {
  const int n = probs->value.rows();
  auto picked = mul(make_const(mask), log(clamp_min(probs, kLogFloor)));
  return scale(sum_all(picked), -1.0 / static_cast<double>(n));
}

std::vector<std::vector<int>> rows_by_class(std::span<const int> labels,
                                            int class_count) {
  std::vector<std::vector<int>> out(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[labels[i]].push_back(static_cast<int>(i));
  return out;
}

}  // namespace

bool LossBreakdown::all_finite() const {
  return std::isfinite(l_s) && std::isfinite(l_dis) && std::isfinite(l_c) &&
         std::isfinite(l_d) && std::isfinite(l_m) && std::isfinite(l_em);
}

NodePtr mean_cross_entropy(const NodePtr& probs, std::span<const int> labels) {
  const Matrix& p = probs->value;
  if (static_cast<int>(labels.size()) != p.rows())
    throw dimension_error("cross_entropy: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(p.rows()) + " rows");
  Matrix mask(p.rows(), p.cols());
  for (int i = 0; i < p.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= p.cols())
      throw data_error("cross_entropy: label " + std::to_string(y) +
                       " out of range for " + std::to_string(p.cols()) +
                       " classes at row " + std::to_string(i));
    mask(i, y) = 1.0;
  }
  return masked_cross_entropy(probs, mask);
}

NodePtr source_loss(const NodePtr& y_hat_n, const NodePtr& y_hat_p,
                    std::span<const int> labels) {
  const Matrix& pn = y_hat_n->value;
  if (!pn.same_shape(y_hat_p->value))
    throw dimension_error("source_loss: prediction shapes " + shape_string(pn) +
                          " and " + shape_string(y_hat_p->value));
  return add(mean_cross_entropy(y_hat_n, labels),
             mean_cross_entropy(y_hat_p, labels));
}

Matrix draw_projections(int dim, int m, Rng& rng) {
  if (dim < 1 || m < 1)
    throw domain_error("draw_projections: need dim >= 1 and m >= 1");
  Matrix dirs(dim, m);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int j = 0; j < m; ++j) {
    double norm = 0.0;
    while (norm < 1e-12) {
      norm = 0.0;
      for (int i = 0; i < dim; ++i) {
        dirs(i, j) = gauss(rng);
        norm += dirs(i, j) * dirs(i, j);
      }
      norm = std::sqrt(norm);
    }
    for (int i = 0; i < dim; ++i) dirs(i, j) /= norm;
  }
  return dirs;
}

NodePtr swd(const NodePtr& p, const NodePtr& q, const Matrix& directions) {
  if (!p->value.same_shape(q->value))
    throw dimension_error("swd: shapes " + shape_string(p->value) + " and " +
                          shape_string(q->value));
  if (directions.rows() != p->value.cols())
    throw dimension_error("swd: directions " + shape_string(directions) +
                          " for predictions " + shape_string(p->value));
  const int n = p->value.rows();
  const int m = directions.cols();
  auto dirs = make_const(directions);
  auto diff = sub(sort_columns(matmul(p, dirs)), sort_columns(matmul(q, dirs)));
  return scale(sum_all(mul(diff, diff)), 1.0 / (static_cast<double>(n) * m));
}

NodePtr swd(const NodePtr& p, const NodePtr& q, int num_projections, Rng& rng) {
  return swd(p, q, draw_projections(p->value.cols(), num_projections, rng));
}

ConfidentSubset filter_confident(const Matrix& y_hat_p_t, double sigma) {
  ConfidentSubset out;
  for (int i = 0; i < y_hat_p_t.rows(); ++i) {
    const int c = argmax_row(y_hat_p_t, i);
    if (y_hat_p_t(i, c) > sigma) {
      out.indices.push_back(i);
      out.labels.push_back(c);
    }
  }
  out.classes_present = out.labels;
  std::sort(out.classes_present.begin(), out.classes_present.end());
  out.classes_present.erase(
      std::unique(out.classes_present.begin(), out.classes_present.end()),
      out.classes_present.end());
  return out;
}

AlignmentTerms alignment_loss(const NodePtr& z_s, std::span<const int> y_s,
                              const NodePtr& z_t, const ConfidentSubset& subset) {
  AlignmentTerms out;

  int max_label = -1;
  for (int y : y_s) max_label = std::max(max_label, y);
  for (int c : subset.classes_present) max_label = std::max(max_label, c);
  auto source_rows = rows_by_class(y_s, max_label + 1);

  std::vector<std::vector<int>> target_rows(max_label + 1);
  for (std::size_t k = 0; k < subset.indices.size(); ++k)
    target_rows[subset.labels[k]].push_back(subset.indices[k]);

  for (int c : subset.classes_present)
    if (!source_rows[c].empty()) out.classes_used.push_back(c);

  auto zero = [] { return make_const(Matrix(1, 1)); };
  if (out.classes_used.empty()) {
    out.skipped = true;
    out.l_c = zero();
    out.l_d = zero();
    return out;
  }

  std::vector<NodePtr> mu_s, mu_t;
  for (int c : out.classes_used) {
    mu_s.push_back(mean_rows(z_s, source_rows[c]));
    mu_t.push_back(mean_rows(z_t, target_rows[c]));
  }

  const int k = static_cast<int>(out.classes_used.size());
  NodePtr same_acc;
  for (int i = 0; i < k; ++i) {
    auto term = l2_norm(sub(mu_s[i], mu_t[i]));
    same_acc = same_acc ? add(same_acc, term) : term;
  }
  out.l_c = scale(same_acc, 1.0 / k);

  if (k < 2) {
    out.single_class = true;
    out.l_d = zero();
    return out;
  }
  NodePtr diff_acc;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      auto term = l2_norm(sub(mu_s[i], mu_t[j]));
      diff_acc = diff_acc ? add(diff_acc, term) : term;
    }
  out.l_d = scale(diff_acc, 1.0 / (static_cast<double>(k) * (k - 1)));
  return out;
}

NodePtr entropy_loss(const NodePtr& y_hat_n_t, const NodePtr& y_hat_p_t) {
  if (!y_hat_n_t->value.same_shape(y_hat_p_t->value))
    throw dimension_error("entropy_loss: shapes " +
                          shape_string(y_hat_n_t->value) + " and " +
                          shape_string(y_hat_p_t->value));
  const double n = y_hat_n_t->value.rows();
  auto ent = [n](const NodePtr& p) {
    return scale(sum_all(mul(p, log(clamp_min(p, kLogFloor)))), -1.0 / n);
  };
  return add(ent(y_hat_n_t), ent(y_hat_p_t));
}

}  // namespace uda
