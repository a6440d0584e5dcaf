#pragma once

#include <array>
#include <cstddef>

#include "ojasde/matrix.hpp"

namespace ojasde {

/// Dense rank-4 array indexed (i,j,k,l) in lexicographic order.
///
/// The flattening convention is fixed for the whole library: index pair (i,j)
/// maps to flat row i*n2 + j and (k,l) to flat column k*n4 + l (0-based).
/// With this convention a tensor is (i,j)<->(k,l) symmetric iff its flattened
/// matrix is symmetric.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t n1, std::size_t n2, std::size_t n3, std::size_t n4)
      : d_{n1, n2, n3, n4}, a_(n1 * n2 * n3 * n4, 0.0) {}

  std::size_t dim(std::size_t k) const { return d_[k]; }
  const std::array<std::size_t, 4>& dims() const { return d_; }
  std::size_t size() const { return a_.size(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k,
                     std::size_t l) {
    return a_[((i * d_[1] + j) * d_[2] + k) * d_[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k,
                    std::size_t l) const {
    return a_[((i * d_[1] + j) * d_[2] + k) * d_[3] + l];
  }
  double& operator[](std::size_t k) { return a_[k]; }
  double operator[](std::size_t k) const { return a_[k]; }

 private:
  std::array<std::size_t, 4> d_{0, 0, 0, 0};
  std::vector<double> a_;
};

/// Flatten T_ijkl to the (n1*n2) x (n3*n4) matrix of the fixed convention.
/// Requires paired dims (n1==n3, n2==n4) so the result is square.
inline Matrix flatten4(const Tensor4& t) {
  if (t.dim(0) != t.dim(2) || t.dim(1) != t.dim(3))
    throw DimMismatch("flatten4 requires paired dims");
  const std::size_t r = t.dim(0) * t.dim(1);
  Matrix m(r, r);
  for (std::size_t k = 0; k < t.size(); ++k) m[k] = t[k];
  return m;
}

inline Tensor4 unflatten4(const Matrix& m, std::size_t n1, std::size_t n2) {
  if (m.rows() != n1 * n2 || m.cols() != n1 * n2)
    throw DimMismatch("unflatten4 shape");
  Tensor4 t(n1, n2, n1, n2);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = m[k];
  return t;
}

/// Contraction (T . F)_ij = T_ijkl F_kl.
inline Matrix contract_matrix(const Tensor4& t, const Matrix& f) {
  if (t.dim(2) != f.rows() || t.dim(3) != f.cols())
    throw DimMismatch("tensor-matrix contraction shape");
  Matrix r(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < t.dim(2); ++k)
        for (std::size_t l = 0; l < t.dim(3); ++l) s += t(i, j, k, l) * f(k, l);
      r(i, j) = s;
    }
  return r;
}

/// Contraction (T . S)_ijkl = T_ijrs S_rskl via the flattened product.
inline Tensor4 contract_tensor(const Tensor4& t, const Tensor4& s) {
  return unflatten4(matmul(flatten4(t), flatten4(s)), t.dim(0), t.dim(1));
}

}  // namespace ojasde
