#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ojasde/matrix.hpp"

namespace ojasde {

/// Eigendecomposition of a symmetric matrix: eigenvalues in descending order,
/// eigenvectors as orthonormal columns of V.
struct SymEigResult {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
///
/// Deterministic for identical input (fixed sweep order); accurate to
/// ~machine precision for the small matrices this library works with.
/// The input is symmetrized internally; asymmetry beyond
/// 1e-10 * ||S||_F is rejected.
inline SymEigResult sym_eig(const Matrix& s_in) {
  if (s_in.rows() != s_in.cols()) throw NonSquare("sym_eig: non-square input");
  const std::size_t n = s_in.rows();
  const double scale = frobenius_norm(s_in);

  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      asym += (s_in(i, j) - s_in(j, i)) * (s_in(i, j) - s_in(j, i));
  asym = std::sqrt(2.0 * asym);
  if (asym > 1e-10 * std::max(scale, 1e-300))
    throw ExcessiveAsymmetry("sym_eig: input asymmetry above tolerance");

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (s_in(i, j) + s_in(j, i));
  Matrix v = Matrix::identity(n);

  const double off_tol = 1e-14 * std::max(scale, 1e-300);
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        off = std::max(off, std::abs(a(p, q)));
    if (off <= off_tol) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= off_tol * 1e-2) continue;
        const double theta = 0.5 * (a(q, q) - a(p, p)) / apq;
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymEigResult r;
  r.eigenvalues.resize(n);
  r.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    r.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) r.eigenvectors(i, j) = v(i, order[j]);
  }
  return r;
}

/// Symmetric PSD square root R = V diag(sqrt(max(lambda,0))) V^T.
///
/// Eigenvalues in [-clip_tol*scale, 0] are clipped to zero; anything below
/// -clip_tol*scale means the input was not a covariance and is rejected.
inline Matrix psd_sqrt(const Matrix& s, double clip_tol = 1e-10) {
  SymEigResult e = sym_eig(s);
  const std::size_t n = s.rows();
  double lam_max = 0.0;
  for (double l : e.eigenvalues) lam_max = std::max(lam_max, l);
  const double floor = -clip_tol * std::max(1.0, lam_max);
  std::vector<double> root(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = e.eigenvalues[i];
    if (l < floor) throw NotPSD("psd_sqrt: eigenvalue below -clip_tol*scale");
    root[i] = l > 0.0 ? std::sqrt(l) : 0.0;
  }
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        sum += e.eigenvectors(i, k) * root[k] * e.eigenvectors(j, k);
      r(i, j) = sum;
      r(j, i) = sum;
    }
  return r;
}

}  // namespace ojasde
