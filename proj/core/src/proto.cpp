#include "uda/proto.hpp"

#include <string>

#include "uda/errors.hpp"

namespace uda {

namespace {

// Rows scaled to unit norm; a zero prototype row names its class.
Matrix normalized_prototypes(const Matrix& mu) {
  Matrix out = mu;
  for (int c = 0; c < mu.rows(); ++c) {
    const double n = row_norm(mu, c);
    if (n == 0.0)
      throw domain_error("prototype row " + std::to_string(c) +
                         " has zero norm");
    for (int j = 0; j < mu.cols(); ++j) out(c, j) /= n;
  }
  return out;
}

std::vector<std::vector<int>> rows_by_label(std::span<const int> labels,
                                            int class_count) {
  std::vector<std::vector<int>> rows(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= class_count)
      throw data_error("label " + std::to_string(y) + " out of range for " +
                       std::to_string(class_count) + " classes");
    rows[y].push_back(static_cast<int>(i));
  }
  return rows;
}

}  // namespace

NodePtr proto_predict(const Prototypes& p, const NodePtr& z) {
  if (z->value.cols() != p.dim())
    throw dimension_error("proto_predict: embeddings " +
                          shape_string(z->value) + " vs prototypes " +
                          shape_string(p.mu));
  auto mu_unit = make_const(transposed(normalized_prototypes(p.mu)));
  auto cosine = matmul(row_l2_normalize(z), mu_unit);
  return row_softmax(scale(cosine, 1.0 / p.temperature));
}

Prototypes init_from_source(const Matrix& z_s, std::span<const int> y_s,
                            int class_count, double temperature) {
  if (class_count < 1) throw domain_error("init_from_source: class_count < 1");
  if (static_cast<int>(y_s.size()) != z_s.rows())
    throw dimension_error("init_from_source: " + std::to_string(y_s.size()) +
                          " labels for " + std::to_string(z_s.rows()) +
                          " rows");
  if (temperature <= 0.0)
    throw domain_error("init_from_source: temperature must be positive");

  auto rows = rows_by_label(y_s, class_count);
  Prototypes p;
  p.mu = Matrix(class_count, z_s.cols());
  p.source_counts.assign(class_count, 0);
  p.target_counts.assign(class_count, 0);
  p.temperature = temperature;
  for (int c = 0; c < class_count; ++c) {
    if (rows[c].empty())
      throw domain_error("prototype init: class " + std::to_string(c) +
                         " has no source samples");
    Matrix mean = mean_of_rows(z_s, rows[c]);
    for (int j = 0; j < z_s.cols(); ++j) p.mu(c, j) = mean(0, j);
    p.source_counts[c] = static_cast<long>(rows[c].size());
  }
  return p;
}

void refresh_from_batch(Prototypes& p, const Matrix& z_s,
                        std::span<const int> y_s) {
  auto rows = rows_by_label(y_s, p.classes());
  for (int c = 0; c < p.classes(); ++c) {
    if (rows[c].empty()) continue;
    Matrix mean = mean_of_rows(z_s, rows[c]);
    for (int j = 0; j < p.dim(); ++j) p.mu(c, j) = mean(0, j);
    p.source_counts[c] = static_cast<long>(rows[c].size());
  }
}

RefineResult refine_on_target(const Prototypes& p, const Matrix& z_t,
                              int max_steps) {
  if (max_steps < 1)
    throw contract_error("refine_on_target: max_steps must be >= 1");

  RefineResult result;
  result.prototypes = p;
  std::vector<int> previous;

  for (int pass = 1; pass <= max_steps; ++pass) {
    result.probabilities =
        proto_predict(result.prototypes, make_const(z_t))->value;
    result.labels.assign(z_t.rows(), 0);
    for (int i = 0; i < z_t.rows(); ++i)
      result.labels[i] = argmax_row(result.probabilities, i);
    result.passes = pass;

    if (pass > 1 && result.labels == previous) {
      // Re-deriving the means from identical assignments cannot move the
      // prototypes, so this is a fixed point.
      result.converged = true;
      return result;
    }
    previous = result.labels;

    auto rows = rows_by_label(result.labels, p.classes());
    for (int c = 0; c < p.classes(); ++c) {
      result.prototypes.target_counts[c] = static_cast<long>(rows[c].size());
      if (rows[c].empty()) continue;  // keep the previous prototype
      Matrix mean = mean_of_rows(z_t, rows[c]);
      for (int j = 0; j < p.dim(); ++j) result.prototypes.mu(c, j) = mean(0, j);
    }
  }
  return result;
}

}  // namespace uda
