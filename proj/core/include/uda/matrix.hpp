#ifndef UDA_MATRIX_HPP
#define UDA_MATRIX_HPP

#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace uda {

using Rng = std::mt19937_64;

/// Dense row-major matrix of doubles. The single numeric carrier of the
/// library: feature batches, weights, gradients, probability tables.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols);  // zero-filled
  Matrix(int rows, int cols, std::vector<double> values);

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
  static Matrix full(int rows, int cols, double value);
  static Matrix identity(int n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* row_ptr(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row_ptr(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  void fill(double value);
  void set_zero() { fill(0.0); }

  bool operator==(const Matrix& other) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

// Kernels. matmul requires a.cols == b.rows and throws dimension_error
// naming both shapes otherwise.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transposed(const Matrix& m);

void add_inplace(Matrix& dst, const Matrix& src);                  // dst += src
void add_scaled_inplace(Matrix& dst, const Matrix& src, double k); // dst += k*src

double sum(const Matrix& m);
int argmax_row(const Matrix& m, int row);       // ties: lowest column index
double row_norm(const Matrix& m, int row);      // Euclidean norm of one row
Matrix mean_of_rows(const Matrix& m, std::span<const int> indices);

// Deterministic fills; a fresh distribution is constructed per call so the
// draw sequence depends only on the generator state.
void fill_uniform(Matrix& m, Rng& rng, double lo, double hi);
void fill_normal(Matrix& m, Rng& rng, double mean, double stddev);

}  // namespace uda

#endif
