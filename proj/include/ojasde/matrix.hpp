#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "ojasde/errors.hpp"

namespace ojasde {

/// Dense real matrix, row-major storage. Sized for desk-scale work (n <= 16);
/// all operations are plain loops and return by value.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals)
      : rows_(rows), cols_(cols), a_(vals) {
    if (a_.size() != rows * cols) throw DimMismatch("matrix initializer size");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return a_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a_[i * cols_ + j];
  }
  double& operator[](std::size_t k) { return a_[k]; }
  double operator[](std::size_t k) const { return a_[k]; }

  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

inline Matrix operator+(const Matrix& x, const Matrix& y) {
  if (!x.same_shape(y)) throw DimMismatch("matrix add shape");
  Matrix r = x;
  for (std::size_t k = 0; k < r.size(); ++k) r[k] += y[k];
  return r;
}

inline Matrix operator-(const Matrix& x, const Matrix& y) {
  if (!x.same_shape(y)) throw DimMismatch("matrix sub shape");
  Matrix r = x;
  for (std::size_t k = 0; k < r.size(); ++k) r[k] -= y[k];
  return r;
}

inline Matrix operator*(double s, const Matrix& x) {
  Matrix r = x;
  for (std::size_t k = 0; k < r.size(); ++k) r[k] *= s;
  return r;
}

inline Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.rows()) throw DimMismatch("matmul inner dims");
  Matrix r(x.rows(), y.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xik = x(i, k);
      for (std::size_t j = 0; j < y.cols(); ++j) r(i, j) += xik * y(k, j);
    }
  return r;
}

inline Matrix transpose(const Matrix& x) {
  Matrix r(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) r(j, i) = x(i, j);
  return r;
}

inline double frobenius_norm_sq(const Matrix& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * x[k];
  return s;
}

inline double frobenius_norm(const Matrix& x) {
  return std::sqrt(frobenius_norm_sq(x));
}

inline double max_abs(const Matrix& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s = std::max(s, std::abs(x[k]));
  return s;
}

inline double trace(const Matrix& x) {
  if (x.rows() != x.cols()) throw NonSquare("trace");
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, i);
  return s;
}

inline double dot(const Matrix& x, const Matrix& y) {
  if (!x.same_shape(y)) throw DimMismatch("dot shape");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

inline bool all_finite(const Matrix& x) {
  for (std::size_t k = 0; k < x.size(); ++k)
    if (!std::isfinite(x[k])) return false;
  return true;
}

/// ||W^T W - I||_F, the orthonormality defect of the columns of W.
inline double orthogonality_defect(const Matrix& w) {
  Matrix g = matmul(transpose(w), w);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius_norm(g);
}

}  // namespace ojasde
