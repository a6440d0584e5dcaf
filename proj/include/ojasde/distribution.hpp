#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ojasde/matrix.hpp"
#include "ojasde/rng.hpp"
#include "ojasde/tensor4.hpp"

namespace ojasde {

/// Bounded mean-zero law of the sample vector x with exact second and fourth
/// moments. Two kinds: a finite list of weighted atoms, or a product of
/// centered uniforms given by per-coordinate half-widths.
struct DistributionSpec {
  enum class Kind { FiniteAtoms, ProductUniform };

  Kind kind = Kind::ProductUniform;
  std::size_t dim = 0;
  std::vector<std::vector<double>> atoms;  // FiniteAtoms
  std::vector<double> weights;             // FiniteAtoms
  std::vector<double> half_widths;         // ProductUniform

  static DistributionSpec finite_atoms(std::vector<std::vector<double>> atoms,
                                       std::vector<double> weights) {
    DistributionSpec d;
    d.kind = Kind::FiniteAtoms;
    d.atoms = std::move(atoms);
    d.weights = std::move(weights);
    if (d.atoms.empty() || d.atoms.size() != d.weights.size())
      throw ValidationError("finite_atoms: atoms/weights size mismatch");
    d.dim = d.atoms[0].size();
    double wsum = 0.0;
    for (double w : d.weights) {
      if (w < 0.0) throw ValidationError("finite_atoms: negative weight");
      wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
      throw ValidationError("finite_atoms: weights must sum to 1");
    for (const auto& a : d.atoms)
      if (a.size() != d.dim)
        throw ValidationError("finite_atoms: inconsistent atom dimension");
    d.check_mean_zero();
    return d;
  }

  static DistributionSpec product_uniform(std::vector<double> half_widths) {
    DistributionSpec d;
    d.kind = Kind::ProductUniform;
    d.half_widths = std::move(half_widths);
    d.dim = d.half_widths.size();
    for (double h : d.half_widths)
      if (!(h >= 0.0) || !std::isfinite(h))
        throw UnboundedSupport("product_uniform: half-widths must be finite");
    return d;
  }

  /// Exact bound M with sup ||x||_2 <= M (assumption of a compact law).
  double sup_norm() const {
    if (kind == Kind::FiniteAtoms) {
      double m = 0.0;
      for (const auto& a : atoms) {
        double s = 0.0;
        for (double v : a) s += v * v;
        m = std::max(m, s);
      }
      return std::sqrt(m);
    }
    double s = 0.0;
    for (double h : half_widths) s += h * h;
    return std::sqrt(s);
  }

  std::vector<double> sample(RngStream& rng) const {
    if (kind == Kind::FiniteAtoms) {
      const double u = rng.uniform01();
      double acc = 0.0;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        acc += weights[i];
        if (u < acc) return atoms[i];
      }
      return atoms.back();
    }
    std::vector<double> x(dim);
    for (std::size_t a = 0; a < dim; ++a)
      x[a] = half_widths[a] * (2.0 * rng.uniform01() - 1.0);
    return x;
  }

 private:
  void check_mean_zero() const {
    std::vector<double> m(dim, 0.0);
    for (std::size_t i = 0; i < atoms.size(); ++i)
      for (std::size_t a = 0; a < dim; ++a) m[a] += weights[i] * atoms[i][a];
    double n2 = 0.0;
    for (double v : m) n2 += v * v;
    if (std::sqrt(n2) > 1e-12)
      throw NonZeroMean("finite_atoms: law must have zero mean");
  }
};

/// A distribution together with its exact second-moment matrix A = E[x x^T]
/// and fourth-moment tensor T4_abcd = E[x_a x_b x_c x_d].
struct ModelContext {
  DistributionSpec dist;
  Matrix a;    // n x n, symmetric PSD
  Tensor4 t4;  // n^4, totally symmetric
  std::size_t n = 0;
};

/// Build the exact moment context. Finite kind by enumeration over atoms;
/// product-uniform by the closed-form uniform moments E[x^2] = h^2/3,
/// E[x^4] = h^4/5 (odd moments vanish).
inline ModelContext exact_moments(const DistributionSpec& dist) {
  ModelContext ctx;
  ctx.dist = dist;
  ctx.n = dist.dim;
  const std::size_t n = dist.dim;
  ctx.a = Matrix(n, n);
  ctx.t4 = Tensor4(n, n, n, n);

  if (dist.kind == DistributionSpec::Kind::FiniteAtoms) {
    for (std::size_t i = 0; i < dist.atoms.size(); ++i) {
      const auto& x = dist.atoms[i];
      const double w = dist.weights[i];
      for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) ctx.a(p, q) += w * x[p] * x[q];
      // Multiply in sorted index order so the tensor is bitwise symmetric
      // under index permutations.
      for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q)
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t s = 0; s < n; ++s) {
              std::size_t idx[4] = {p, q, r, s};
              std::sort(idx, idx + 4);
              ctx.t4(p, q, r, s) +=
                  w * (((x[idx[0]] * x[idx[1]]) * x[idx[2]]) * x[idx[3]]);
            }
    }
    return ctx;
  }

  for (std::size_t p = 0; p < n; ++p) {
    const double h = dist.half_widths[p];
    ctx.a(p, p) = h * h / 3.0;
  }
  // E[x_p x_q x_r x_s] factorizes over coordinates; nonzero only when every
  // coordinate appears an even number of times.
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t s = 0; s < n; ++s) {
          std::vector<int> cnt(n, 0);
          ++cnt[p], ++cnt[q], ++cnt[r], ++cnt[s];
          double m = 1.0;
          for (std::size_t a = 0; a < n; ++a) {
            const double h2 = dist.half_widths[a] * dist.half_widths[a];
            if (cnt[a] == 1 || cnt[a] == 3) {
              m = 0.0;
              break;
            }
            if (cnt[a] == 2) m *= h2 / 3.0;
            if (cnt[a] == 4) m *= h2 * h2 / 5.0;
          }
          ctx.t4(p, q, r, s) = m;
        }
  return ctx;
}

}  // namespace ojasde
