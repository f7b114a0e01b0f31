#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace texcov {

/// Dense row-major matrix of doubles. Sized for the small problems in this
/// library (descriptor dimensions up to a few dozen, Gram matrices up to a
/// few hundred).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transposed() const;
  double trace() const;
  double frobenius_norm() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);

/// Frobenius inner product tr(A^T B).
double frobenius_inner(const Matrix& a, const Matrix& b);

/// (M + M^T) / 2.
Matrix symmetrized(const Matrix& m);

/// Largest |m(i,j) - m(j,i)| relative to max(1, |m(i,j)|).
double asymmetry(const Matrix& m);

/// Result of an LDL^T-free Cholesky attempt; `ok` is false when a pivot is
/// not strictly positive.
struct Cholesky {
  bool ok = false;
  Matrix lower;
  double log_det = 0.0;
};

Cholesky cholesky(const Matrix& spd);

/// Solves (L L^T) x = b for a successful factorization.
std::vector<double> cholesky_solve(const Cholesky& chol, std::span<const double> b);

/// Solves a general square system by partially pivoted Gaussian elimination.
/// Returns false when the matrix is numerically singular.
bool solve_linear(Matrix a, std::vector<double>& b);

}  // namespace texcov
