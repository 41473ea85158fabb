#include "uda/eval.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "uda/errors.hpp"
#include "uda/proto.hpp"

namespace uda {

namespace {

Matrix confusion_matrix(const Matrix& probs, std::span<const int> labels,
                        int classes) {
  Matrix confusion(classes, classes);
  for (int i = 0; i < probs.rows(); ++i)
    confusion(labels[i], argmax_row(probs, i)) += 1.0;
  return confusion;
}

double trace_accuracy(const Matrix& confusion, int n) {
  double correct = 0.0;
  for (int c = 0; c < confusion.rows(); ++c) correct += confusion(c, c);
  return correct / static_cast<double>(n);
}

std::vector<double> per_class_accuracy(const Matrix& confusion) {
  std::vector<double> acc(confusion.rows(), 0.0);
  for (int c = 0; c < confusion.rows(); ++c) {
    double total = 0.0;
    for (int j = 0; j < confusion.cols(); ++j) total += confusion(c, j);
    if (total > 0.0) acc[c] = confusion(c, c) / total;
  }
  return acc;
}

void append_row(std::string& out, const Matrix& m, int row) {
  char buf[64];
  for (int j = 0; j < m.cols(); ++j) {
    std::snprintf(buf, sizeof buf, j ? " %.10g" : "%.10g", m(row, j));
    out += buf;
  }
  out += '\n';
}

}  // namespace

EvalReport evaluate(const TrainState& state, const Dataset& target,
                    int proto_max_steps) {
  if (!target.labeled())
    throw data_error("evaluation requires a labeled target set");
  if (proto_max_steps < 1)
    throw contract_error("evaluate: refinement steps must be >= 1");

  Rng unused(0);
  const auto z =
      state.generator.forward(make_const(target.features), false, unused);
  const Matrix probs_n = state.classifier.forward(z)->value;
  const int classes = probs_n.cols();
  if (target.class_count != classes)
    throw data_error("evaluation set has " +
                     std::to_string(target.class_count) +
                     " classes, model has " + std::to_string(classes));

  Matrix probs_p_unrefined;
  Matrix probs_p;
  if (state.second_classifier) {
    probs_p = state.second_classifier->forward(z)->value;
    probs_p_unrefined = probs_p;
  } else {
    probs_p_unrefined = proto_predict(state.prototypes, z)->value;
    const RefineResult refined =
        refine_on_target(state.prototypes, z->value, proto_max_steps);
    probs_p = proto_predict(refined.prototypes, z)->value;
  }

  EvalReport report;
  report.n_eval = target.size();
  report.confusion_cn = confusion_matrix(probs_n, *target.labels, classes);
  report.confusion_cp = confusion_matrix(probs_p, *target.labels, classes);
  report.acc_cn = trace_accuracy(report.confusion_cn, report.n_eval);
  report.acc_cp = trace_accuracy(report.confusion_cp, report.n_eval);
  report.acc_cp_unrefined = trace_accuracy(
      confusion_matrix(probs_p_unrefined, *target.labels, classes),
      report.n_eval);
  report.per_class_cn = per_class_accuracy(report.confusion_cn);
  report.per_class_cp = per_class_accuracy(report.confusion_cp);
  return report;
}

PcaResult pca_project(const Matrix& z) {
  if (z.rows() < 2) throw domain_error("pca_project: need at least 2 rows");
  if (z.cols() < 2) throw domain_error("pca_project: need at least 2 columns");
  const int n = z.rows();
  const int d = z.cols();

  Matrix centered = z;
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += centered(i, j);
    mean /= n;
    for (int i = 0; i < n; ++i) centered(i, j) -= mean;
  }

  using EMap = Eigen::Map<
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                          Eigen::RowMajor>>;
  EMap zc(centered.data().data(), n, d);
  const Eigen::MatrixXd cov = (zc.transpose() * zc) / (n - 1);

  PcaResult result;
  result.coords = Matrix(n, 2);
  if (cov.trace() < 1e-18) {
    result.degenerate = true;
    return result;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd direction = solver.eigenvectors().col(d - 1 - k);
    int peak = 0;
    for (int i = 1; i < d; ++i)
      if (std::abs(direction(i)) > std::abs(direction(peak))) peak = i;
    if (direction(peak) < 0.0) direction = -direction;
    const Eigen::VectorXd coord = zc * direction;
    for (int i = 0; i < n; ++i) result.coords(i, k) = coord(i);
  }
  return result;
}

std::string format_report(const EvalReport& report) {
  char buf[64];
  std::string out;
  out += "n_eval " + std::to_string(report.n_eval) + '\n';
  const auto line = [&](const char* key, double value) {
    std::snprintf(buf, sizeof buf, "%s %.10g\n", key, value);
    out += buf;
  };
  line("acc_cn", report.acc_cn);
  line("acc_cp", report.acc_cp);
  line("acc_cp_unrefined", report.acc_cp_unrefined);
  const auto vec = [&](const char* key, const std::vector<double>& values) {
    out += key;
    for (double v : values) {
      std::snprintf(buf, sizeof buf, " %.10g", v);
      out += buf;
    }
    out += '\n';
  };
  vec("per_class_cn", report.per_class_cn);
  vec("per_class_cp", report.per_class_cp);
  out += "confusion_cn\n";
  for (int i = 0; i < report.confusion_cn.rows(); ++i)
    append_row(out, report.confusion_cn, i);
  out += "confusion_cp\n";
  for (int i = 0; i < report.confusion_cp.rows(); ++i)
    append_row(out, report.confusion_cp, i);
  return out;
}

void write_projection_csv(const std::string& path, const Matrix& coords,
                          std::span<const int> domains,
                          std::span<const int> labels,
                          std::span<const int> preds) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (coords.cols() != 2)
    throw dimension_error("projection csv: coords must be n x 2, got " +
                          shape_string(coords));
  if (domains.size() != n || labels.size() != n || preds.size() != n)
    throw dimension_error("projection csv: column lengths disagree");

  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << "x,y,domain,label,pred\n";
  char buf[128];
  for (std::size_t i = 0; i < n; ++i) {
    const int row = static_cast<int>(i);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", coords(row, 0),
                  coords(row, 1));
    out << buf << (domains[i] == 0 ? "source" : "target") << ','
        << labels[i] << ',' << preds[i] << '\n';
  }
  if (!out) throw data_error("write failed for " + path);
}

}  // namespace uda
