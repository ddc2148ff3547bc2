#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace almc {

using Vec = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_norm(std::span<const double> a);

/// Dense row-major matrix. Sized for the small ambient dimensions this
/// project works in; nothing here is tuned for large systems.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix diagonal(const Vec& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool is_square() const { return rows_ == cols_; }
  bool is_symmetric(double tol = 1e-12) const;
  double max_abs() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Vec operator*(const Matrix& a, const Vec& x);
Matrix transpose(const Matrix& a);

/// aᵀa, symmetrized explicitly.
Matrix gram(const Matrix& a);

void matvec(const Matrix& a, const double* x, double* out);

/// Cholesky factorization a = L·Lᵀ of a symmetric positive-definite matrix.
/// Throws std::invalid_argument if a pivot falls below tolerance.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& a);

  const Matrix& lower() const { return lower_; }
  double log_det() const;                //< log det(a)
  Vec solve(std::span<const double> b) const;  //< a x = b
  Matrix inverse() const;

 private:
  Matrix lower_;
};

struct SymmetricEigen {
  Vec values;      // ascending
  Matrix vectors;  // columns are eigenvectors, aligned with values
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymmetricEigen symmetric_eigen(const Matrix& a);

/// Minimum-norm least-squares solution of a x = b via the eigendecomposition
/// of aᵀa; rank-deficient systems are handled by a pseudo-inverse cutoff.
Vec least_squares(const Matrix& a, const Vec& b);

}  // namespace almc
