#include "uda/matrix.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

#include "uda/errors.hpp"

namespace uda {

namespace {
using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;
}  // namespace

Matrix::Matrix(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {
  if (rows < 0 || cols < 0) throw dimension_error("negative matrix dimension");
}

Matrix::Matrix(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols)
    throw dimension_error("matrix data length does not match rows*cols");
}

Matrix Matrix::full(int rows, int cols, double value) {
  Matrix m(rows, cols);
  m.fill(value);
  return m;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c)
      throw dimension_error("from_rows: ragged initializer");
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Matrix::fill(double value) {
  std::fill(data_.begin(), data_.end(), value);
}

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw dimension_error("matmul: incompatible shapes " + shape_string(a) +
                          " and " + shape_string(b));
  Matrix out(a.rows(), b.cols());
  if (out.size() == 0 || a.cols() == 0) return out;
  ConstMap ma(a.data().data(), a.rows(), a.cols());
  ConstMap mb(b.data().data(), b.rows(), b.cols());
  MutMap mo(out.data().data(), out.rows(), out.cols());
  mo.noalias() = ma * mb;
  return out;
}

Matrix transposed(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

void add_inplace(Matrix& dst, const Matrix& src) {
  if (!dst.same_shape(src))
    throw dimension_error("add_inplace: shapes " + shape_string(dst) + " and " +
                          shape_string(src));
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void add_scaled_inplace(Matrix& dst, const Matrix& src, double k) {
  if (!dst.same_shape(src))
    throw dimension_error("add_scaled_inplace: shapes " + shape_string(dst) +
                          " and " + shape_string(src));
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * s[i];
}

double sum(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v;
  return acc;
}

int argmax_row(const Matrix& m, int row) {
  int best = 0;
  double best_v = m(row, 0);
  for (int j = 1; j < m.cols(); ++j) {
    if (m(row, j) > best_v) {
      best_v = m(row, j);
      best = j;
    }
  }
  return best;
}

double row_norm(const Matrix& m, int row) {
  double acc = 0.0;
  for (int j = 0; j < m.cols(); ++j) acc += m(row, j) * m(row, j);
  return std::sqrt(acc);
}

Matrix mean_of_rows(const Matrix& m, std::span<const int> indices) {
  if (indices.empty()) throw domain_error("mean_of_rows: empty index set");
  Matrix out(1, m.cols());
  for (int idx : indices)
    for (int j = 0; j < m.cols(); ++j) out(0, j) += m(idx, j);
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (int j = 0; j < m.cols(); ++j) out(0, j) *= inv;
  return out;
}

void fill_uniform(Matrix& m, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : m.data()) v = dist(rng);
}

void fill_normal(Matrix& m, Rng& rng, double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  for (double& v : m.data()) v = dist(rng);
}

}  // namespace uda
