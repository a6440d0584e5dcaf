#pragma once

#include <cmath>
#include <cstddef>

#include "ojasde/distribution.hpp"
#include "ojasde/eig.hpp"
#include "ojasde/fd.hpp"
#include "ojasde/matrix.hpp"
#include "ojasde/tensor4.hpp"

namespace ojasde {

/// Skew part Sigma(Lambda, Q) = sum_{j>k} (E_j M E_k - E_k M E_j) with
/// M = Q^T Lambda Q and E_j = e_j e_j^T. Entry (j,k) with j>k is M_jk and
/// entry (k,j) is -M_kj, so the output is skew whenever M is symmetric.
/// Q may be rectangular (n x p); the sums then run over the p columns.
inline Matrix sigma(const Matrix& lambda, const Matrix& q) {
  if (lambda.rows() != lambda.cols() || lambda.rows() != q.rows())
    throw DimMismatch("sigma: shape");
  const Matrix m = matmul(transpose(q), matmul(lambda, q));
  const std::size_t p = q.cols();
  Matrix s(p, p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < j; ++k) {
      s(j, k) += m(j, k);
      s(k, j) -= m(k, j);
    }
  return s;
}

/// Drift G(Lambda, W) = Lambda W - W W^T Lambda W + W Sigma(Lambda, W).
/// Linear in Lambda; tangent to the Stiefel manifold when W has orthonormal
/// columns. Column j reproduces the componentwise online-PCA update.
inline Matrix g_drift(const Matrix& lambda, const Matrix& w) {
  if (lambda.rows() != lambda.cols() || lambda.rows() != w.rows())
    throw DimMismatch("g_drift: shape");
  const Matrix lw = matmul(lambda, w);
  return lw - matmul(w, matmul(transpose(w), lw)) + matmul(w, sigma(lambda, w));
}

/// Right-hand side F1(Q) = Q Sigma(A, Q) of the mean ODE; equals
/// g_drift(A, Q) whenever Q is orthogonal.
inline Matrix f1_rhs(const Matrix& q, const ModelContext& ctx) {
  if (q.rows() != q.cols()) throw DimMismatch("f1_rhs: Q must be square");
  return matmul(q, sigma(ctx.a, q));
}

/// Tangent projection tensor P_ijkl = (w_is w_ks d_jl - w_kj w_il) / 2.
///
/// Defined for arbitrary square W, not just orthogonal: off the manifold it
/// loses idempotence but keeps the identity w_ij P_tjkl + w_tj P_ijkl = 0,
/// which is what the manifold-invariance argument rests on.
inline Tensor4 projection_tensor(const Matrix& w) {
  if (w.rows() != w.cols()) throw NonSquare("projection_tensor");
  const std::size_t n = w.rows();
  Matrix wwt(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += w(i, t) * w(k, t);
      wwt(i, k) = s;
    }
  Tensor4 p(n, n, n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
          p(i, j, k, l) =
              0.5 * ((j == l ? wwt(i, k) : 0.0) - w(k, j) * w(i, l));
  return p;
}

/// Apply the square-case projection tensor without materializing it:
/// (P F)_ij = (W W^T F - W F^T W)_ij / 2. Valid for arbitrary square W.
inline Matrix apply_projection(const Matrix& w, const Matrix& f) {
  if (w.rows() != w.cols() || !w.same_shape(f))
    throw DimMismatch("apply_projection: shape");
  return 0.5 * (matmul(w, matmul(transpose(w), f) - matmul(transpose(f), w)));
}

/// The rectangular tangent-projection formula without the orthonormality
/// guard; integrators use this at predictor points that sit slightly off the
/// manifold mid-step.
inline Matrix project_tangent_unchecked(const Matrix& w, const Matrix& m) {
  if (!w.same_shape(m)) throw DimMismatch("project_tangent: shape");
  const Matrix wtm = matmul(transpose(w), m);
  return m - matmul(w, wtm) + 0.5 * matmul(w, wtm - matmul(transpose(m), w));
}

/// Projection onto the tangent space of the rectangular Stiefel manifold
/// O(n x p): (I - W W^T) M + W (W^T M - M^T W) / 2. Reduces to the square
/// projection at p = n and to the sphere projection (I - W W^T) M at p = 1.
inline Matrix project_tangent(const Matrix& w, const Matrix& m) {
  if (!w.same_shape(m)) throw DimMismatch("project_tangent: shape");
  if (orthogonality_defect(w) > 1e-8)
    throw ColumnsNotOrthonormal("project_tangent: W^T W far from identity");
  return project_tangent_unchecked(w, m);
}

/// The linear map B |-> G(B, W) as an (np) x (n^2) matrix acting on vec(B),
/// with the library's fixed row-major flattening.
inline Matrix g_linear_map(const Matrix& w) {
  const std::size_t n = w.rows(), p = w.cols();
  Matrix lmap(n * p, n * n);
  Matrix basis(n, n);
  for (std::size_t ab = 0; ab < n * n; ++ab) {
    basis[ab] = 1.0;
    const Matrix g = g_drift(basis, w);
    basis[ab] = 0.0;
    for (std::size_t ij = 0; ij < n * p; ++ij) lmap(ij, ab) = g[ij];
  }
  return lmap;
}

/// Noise covariance tensor M_ijkl = E[g_ij(xx^T - A, W) g_kl(xx^T - A, W)],
/// computed exactly from the fourth-moment tensor: with L the linear map of
/// g in its first argument and C_(ab)(cd) = T4_abcd - A_ab A_cd, the
/// flattened M is L C L^T. PSD and (ij)<->(kl) symmetric by construction.
inline Tensor4 covariance_tensor(const Matrix& w, const ModelContext& ctx) {
  if (w.rows() != ctx.n) throw DimMismatch("covariance_tensor: dim");
  const std::size_t n = ctx.n, p = w.cols();
  Matrix c(n * n, n * n);
  for (std::size_t ab = 0; ab < n * n; ++ab)
    for (std::size_t cd = 0; cd < n * n; ++cd)
      c(ab, cd) = ctx.t4[ab * n * n + cd] - ctx.a[ab] * ctx.a[cd];
  const Matrix lmap = g_linear_map(w);
  Matrix m = matmul(lmap, matmul(c, transpose(lmap)));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  Tensor4 t(n, p, n, p);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = m[k];
  return t;
}

/// Tensor square root N = sqrt(M) via the flattened PSD square root.
/// Symmetric, PSD, N.N = M; on the manifold additionally P.N = N.
inline Tensor4 noise_root(const Matrix& w, const ModelContext& ctx) {
  const Tensor4 m = covariance_tensor(w, ctx);
  return unflatten4(psd_sqrt(flatten4(m)), m.dim(0), m.dim(1));
}

/// Analytic partials of the drift: out(ij, kl) = d g_ij(Lambda, W) / d w_kl
/// for symmetric Lambda, square W. Flat indices follow the library
/// convention (row-major pairs).
inline Matrix g_drift_jacobian(const Matrix& lambda, const Matrix& w) {
  if (w.rows() != w.cols() || lambda.rows() != w.rows() ||
      lambda.rows() != lambda.cols())
    throw DimMismatch("g_drift_jacobian: shape");
  const std::size_t n = w.rows();
  const Matrix lw = matmul(lambda, w);                  // (Lambda W)
  const Matrix wtlw = matmul(transpose(w), lw);         // W^T Lambda W
  const Matrix wwtl = matmul(w, matmul(transpose(w), lambda));
  const Matrix sig = sigma(lambda, w);

  // dSigma_ab/dw_kl = [a>b] dM_ab - [a<b] dM_ba with
  // dM_ab/dw_kl = d_al (Lambda W)_kb + d_bl (Lambda W)_ka.
  auto dsigma = [&](std::size_t a, std::size_t b, std::size_t k,
                    std::size_t l) -> double {
    if (a == b) return 0.0;
    if (a > b)
      return (a == l ? lw(k, b) : 0.0) + (b == l ? lw(k, a) : 0.0);
    return -((b == l ? lw(k, a) : 0.0) + (a == l ? lw(k, b) : 0.0));
  };

  Matrix out(n * n, n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          double v = (j == l ? lambda(i, k) : 0.0);
          // - d(W W^T Lambda W)_ij / dw_kl
          v -= (i == k ? wtlw(l, j) : 0.0);
          v -= w(i, l) * lw(k, j);
          v -= (j == l ? wwtl(i, k) : 0.0);
          // + d(W Sigma)_ij / dw_kl
          v += (i == k ? sig(l, j) : 0.0);
          for (std::size_t a = 0; a < n; ++a)
            v += w(i, a) * dsigma(a, j, k, l);
          out(i * n + j, k * n + l) = v;
        }
  return out;
}

/// Ito correction J and second-order candidate drift L at W.
///
/// K = P.N; J_ij = K_rsml dK_ijml/dw_rs with the partial by central finite
/// differences (N hides a matrix square root, so there is no usable closed
/// form); L_ij = -J_ij/2 - g_kl(A, W) dg_ij(A, W)/dw_kl / 2 with the
/// g-Jacobian analytic.
struct SecondOrderTerms {
  Matrix j;
  Matrix l;
};

inline Matrix noise_k_flat(const Matrix& w, const ModelContext& ctx) {
  return matmul(flatten4(projection_tensor(w)),
                psd_sqrt(flatten4(covariance_tensor(w, ctx))));
}

inline SecondOrderTerms second_order_terms(const Matrix& w,
                                           const ModelContext& ctx,
                                           double fd_step = 1e-5,
                                           double manifold_tol = 1e-8) {
  if (w.rows() != w.cols()) throw NonSquare("second_order_terms");
  if (orthogonality_defect(w) > manifold_tol)
    throw NotOnManifold("second_order_terms: W not orthogonal");
  const std::size_t n = w.rows();
  const std::size_t d = n * n;

  const Matrix k = noise_k_flat(w, ctx);
  auto k_entries = [&](const Matrix& wp) {
    return noise_k_flat(wp, ctx).data();
  };
  const auto dk = fd_derivative(k_entries, w, fd_step);

  Matrix j(n, n);
  for (std::size_t ij = 0; ij < d; ++ij) {
    double s = 0.0;
    for (std::size_t rs = 0; rs < d; ++rs)
      for (std::size_t ml = 0; ml < d; ++ml)
        s += k(rs, ml) * dk[rs][ij * d + ml];
    j[ij] = s;
  }

  const Matrix g = g_drift(ctx.a, w);
  const Matrix dg = g_drift_jacobian(ctx.a, w);
  Matrix l(n, n);
  for (std::size_t ij = 0; ij < d; ++ij) {
    double s = 0.0;
    for (std::size_t kl = 0; kl < d; ++kl) s += g[kl] * dg(ij, kl);
    l[ij] = -0.5 * j[ij] - 0.5 * s;
  }
  return {j, l};
}

}  // namespace ojasde
