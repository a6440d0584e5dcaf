#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ojasde/matrix.hpp"
#include "ojasde/mc.hpp"
#include "ojasde/model.hpp"
#include "ojasde/sga.hpp"

namespace ojasde {

/// Differentiable potential on the orthogonal group, from a small registry so
/// configs stay serializable. "oja_brockett" is U(Q) = -tr(D Q^T A Q) with a
/// diagonal weight matrix D in descending order; its projected gradient flow
/// is the Oja-Brockett flow dQ = (A Q D - Q D Q^T A Q) dt.
struct Potential {
  std::string name;
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> grad;
};

inline Potential make_potential(const std::string& name,
                                const ModelContext& ctx,
                                std::vector<double> weights = {}) {
  if (name == "zero") {
    return {name, [](const Matrix&) { return 0.0; },
            [](const Matrix& q) { return Matrix(q.rows(), q.cols()); }};
  }
  if (name == "oja_brockett") {
    const std::size_t n = ctx.n;
    if (weights.empty()) {
      weights.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        weights[i] = static_cast<double>(n - i);
    }
    if (weights.size() != n)
      throw ValidationError("oja_brockett: weight size mismatch");
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = weights[i];
    const Matrix a = ctx.a;
    return {name,
            [a, d](const Matrix& q) {
              return -trace(matmul(d, matmul(transpose(q), matmul(a, q))));
            },
            [a, d](const Matrix& q) {
              return -2.0 * matmul(a, matmul(q, d));
            }};
  }
  throw UnknownPotential("make_potential: unknown potential '" + name + "'");
}

/// One continuous dynamics variant. Exposes the Stratonovich drift a(W), the
/// noise contraction b(W) dB, and the Ito-corrected drift for ito_step.
///
/// Kinds:
///   first_order  dW = G(A,W) dt + sqrt(eta) P.N(W) o dB     (F = 0, H = N)
///   unstable     dW = (G + eta L) dt + sqrt(eta) N(W) o dB  (leaves O(n))
///   langevin     dQ = P o (-grad U dt + sigma dB)
///   generic      dW = (G + eta P.F) dt + sqrt(eta) P.(H dB) o
struct SdeModel {
  enum class Kind { FirstOrder, Unstable, Langevin, Generic };

  Kind kind = Kind::FirstOrder;
  ModelContext ctx;
  double eta = 0.0;
  bool retract = true;
  double fd_step = 1e-5;

  // langevin
  Potential potential;
  double sigma_noise = 0.0;

  // generic
  std::function<Matrix(const Matrix&)> f_field;
  std::function<Tensor4(const Matrix&)> h_field;

  /// Stratonovich drift field.
  Matrix drift(const Matrix& w) const {
    switch (kind) {
      case Kind::FirstOrder:
        return g_drift(ctx.a, w);
      case Kind::Unstable: {
        // L is evaluated lazily per step; finite differences dominate cost.
        const SecondOrderTerms terms =
            second_order_terms(w, ctx, fd_step, /*manifold_tol=*/1e6);
        return g_drift(ctx.a, w) + eta * terms.l;
      }
      case Kind::Langevin:
        return apply_projection(w, -1.0 * potential.grad(w));
      case Kind::Generic:
        return g_drift(ctx.a, w) +
               eta * apply_projection(w, f_field(w));
    }
    throw Error("drift: bad kind");
  }

  /// Noise contraction b(W) dB for a matrix of Brownian increments.
  Matrix noise(const Matrix& w, const Matrix& db) const {
    switch (kind) {
      case Kind::FirstOrder: {
        if (w.rows() == w.cols()) {
          const Matrix kflat = noise_k_flat(w, ctx);
          return std::sqrt(eta) * apply_flat(kflat, db);
        }
        // Rectangular case: project N dB onto the O(n x p) tangent space.
        const Matrix ndb = apply_flat(psd_sqrt(flatten4(covariance_tensor(w, ctx))), db);
        return std::sqrt(eta) * project_tangent_unchecked(w, ndb);
      }
      case Kind::Unstable: {
        const Matrix nflat = psd_sqrt(flatten4(covariance_tensor(w, ctx)));
        return std::sqrt(eta) * apply_flat(nflat, db);
      }
      case Kind::Langevin:
        return sigma_noise * apply_projection(w, db);
      case Kind::Generic:
        return std::sqrt(eta) *
               apply_projection(w, contract_matrix(h_field(w), db));
    }
    throw Error("noise: bad kind");
  }

  /// Ito drift: G + eta P.F + (eta/2) J for the diffusion-approximation
  /// kinds; -P grad U - sigma^2 (n-1)/4 Q for Langevin.
  Matrix ito_drift(const Matrix& w) const {
    switch (kind) {
      case Kind::FirstOrder: {
        const SecondOrderTerms terms = second_order_terms(w, ctx, fd_step, 1e-6);
        return g_drift(ctx.a, w) + (0.5 * eta) * terms.j;
      }
      case Kind::Langevin: {
        const double n1 = static_cast<double>(w.rows()) - 1.0;
        return apply_projection(w, -1.0 * potential.grad(w)) -
               (sigma_noise * sigma_noise * n1 / 4.0) * w;
      }
      case Kind::Generic: {
        const SecondOrderTerms terms = second_order_terms(w, ctx, fd_step, 1e-6);
        return g_drift(ctx.a, w) + eta * apply_projection(w, f_field(w)) +
               (0.5 * eta) * terms.j;
      }
      case Kind::Unstable:
        throw NotOnManifold("ito_step: no Ito form for the unstable model");
    }
    throw Error("ito_drift: bad kind");
  }

 private:
  static Matrix apply_flat(const Matrix& tflat, const Matrix& m) {
    // Contract a flattened 4-tensor against a matrix via vec().
    if (tflat.cols() != m.size()) throw DimMismatch("apply_flat: shape");
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < tflat.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < tflat.cols(); ++c) s += tflat(r, c) * m[c];
      out[r] = s;
    }
    return out;
  }
};

inline SdeModel make_sde_model(SdeModel::Kind kind, const ModelContext& ctx,
                               double eta, bool retract = true) {
  if (eta < 0.0) throw NegativeEta("make_sde_model: eta < 0");
  SdeModel m;
  m.kind = kind;
  m.ctx = ctx;
  m.eta = eta;
  m.retract = retract;
  return m;
}

inline SdeModel make_langevin_model(const ModelContext& ctx,
                                    const std::string& potential_name,
                                    double sigma, bool retract = true,
                                    std::vector<double> weights = {}) {
  SdeModel m;
  m.kind = SdeModel::Kind::Langevin;
  m.ctx = ctx;
  m.eta = 0.0;
  m.retract = retract;
  m.potential = make_potential(potential_name, ctx, std::move(weights));
  m.sigma_noise = sigma;
  return m;
}

/// Polar retraction: the nearest matrix with orthonormal columns,
/// W (W^T W)^{-1/2}. Idempotent on the manifold.
inline Matrix retraction(const Matrix& w) {
  const Matrix gram = matmul(transpose(w), w);
  const SymEigResult e = sym_eig(gram);
  const double lam_max = e.eigenvalues.front();
  if (!(lam_max > 0.0) || e.eigenvalues.back() <= 1e-14 * lam_max)
    throw SingularState("retraction: state is rank deficient");
  const std::size_t p = gram.rows();
  Matrix inv_root(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        s += e.eigenvectors(i, k) * e.eigenvectors(j, k) /
             std::sqrt(e.eigenvalues[k]);
      inv_root(i, j) = s;
      inv_root(j, i) = s;
    }
  return matmul(w, inv_root);
}

inline void check_state(const Matrix& w) {
  if (!all_finite(w) || max_abs(w) > 1e6)
    throw NonFiniteState("sde: trajectory blow-up");
}

/// Stratonovich Heun step: predictor W* = W + a dt + b dB, corrector
/// W' = W + (a(W)+a(W*)) dt/2 + (b(W)dB + b(W*)dB)/2, then the polar
/// retraction when the model asks for it.
inline Matrix sde_step(const SdeModel& model, const Matrix& w, double dt,
                       const Matrix& db) {
  if (!(dt > 0.0)) throw ValidationError("sde_step: dt must be positive");
  const Matrix a0 = model.drift(w);
  const Matrix b0 = model.noise(w, db);
  const Matrix wstar = w + dt * a0 + b0;
  const Matrix a1 = model.drift(wstar);
  const Matrix b1 = model.noise(wstar, db);
  Matrix out = w + (0.5 * dt) * (a0 + a1) + 0.5 * (b0 + b1);
  check_state(out);
  if (model.retract) out = retraction(out);
  return out;
}

/// Euler-Maruyama on the Ito form; a cross-check of the Stratonovich
/// integrator's weak statistics, not a production path.
inline Matrix ito_step(const SdeModel& model, const Matrix& w, double dt,
                       const Matrix& db) {
  if (!(dt > 0.0)) throw ValidationError("ito_step: dt must be positive");
  if (model.kind != SdeModel::Kind::Langevin && orthogonality_defect(w) > 1e-6)
    throw NotOnManifold("ito_step: W not on the manifold");
  Matrix out = w + dt * model.ito_drift(w) + model.noise(w, db);
  check_state(out);
  if (model.retract) out = retraction(out);
  return out;
}

/// Classical 4-stage Runge-Kutta step for a matrix vector field.
inline Matrix rk4_step_field(const Matrix& w, double dt,
                             const std::function<Matrix(const Matrix&)>& f) {
  const Matrix k1 = f(w);
  const Matrix k2 = f(w + (0.5 * dt) * k1);
  const Matrix k3 = f(w + (0.5 * dt) * k2);
  const Matrix k4 = f(w + dt * k3);
  Matrix out = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check_state(out);
  return out;
}

/// RK4 step for the mean flow dQ/dt = F1(Q).
inline Matrix ode_rk4_step(const Matrix& w, double dt, const ModelContext& ctx,
                           bool retract = false) {
  if (!(dt > 0.0)) throw ValidationError("ode_rk4_step: dt must be positive");
  Matrix out = rk4_step_field(
      w, dt, [&](const Matrix& q) { return f1_rhs(q, ctx); });
  if (retract) out = retraction(out);
  return out;
}

/// Stored point of an SDE path; the orthonormality defect is recorded at
/// every stored point.
struct PathPoint {
  double t = 0.0;
  Matrix w;
  double defect = 0.0;
};

inline std::vector<PathPoint> simulate_path(const SdeModel& model,
                                            const Matrix& w0, double dt,
                                            std::size_t n_steps,
                                            RngStream& rng,
                                            std::size_t store_every = 1) {
  std::vector<PathPoint> path;
  Matrix w = w0;
  path.push_back({0.0, w, orthogonality_defect(w)});
  for (std::size_t k = 1; k <= n_steps; ++k) {
    Matrix db = rng.normal_matrix(w.rows(), w.cols());
    for (std::size_t q = 0; q < db.size(); ++q) db[q] *= std::sqrt(dt);
    w = sde_step(model, w, dt, db);
    if (k % store_every == 0 || k == n_steps)
      path.push_back({static_cast<double>(k) * dt, w, orthogonality_defect(w)});
  }
  return path;
}

/// Feynman-Kac estimate of u(W0, t) = E[phi(X(t))] by path simulation with
/// retraction on. Requires t to be an integer multiple of dt.
inline SemigroupEstimate feynman_kac_estimate(const std::string& phi_id,
                                              const Matrix& w0, double t,
                                              const SdeModel& model, double dt,
                                              std::uint64_t n_mc,
                                              std::uint64_t seed,
                                              unsigned n_workers = 0) {
  const double steps_real = t / dt;
  const auto m = static_cast<std::size_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(m)) > 1e-9)
    throw ValidationError("feynman_kac_estimate: t must be a multiple of dt");
  const TestFunction phi = test_function(phi_id);
  SdeModel prod = model;
  prod.retract = true;

  auto task = [&](std::uint64_t, RngStream& rng) {
    Matrix w = w0;
    for (std::size_t k = 0; k < m; ++k) {
      Matrix db = rng.normal_matrix(w.rows(), w.cols());
      for (std::size_t q = 0; q < db.size(); ++q) db[q] *= std::sqrt(dt);
      w = sde_step(prod, w, dt, db);
    }
    return phi(w);
  };
  const McResult r = mc_ensemble(task, std::max<std::uint64_t>(n_mc, 1), seed,
                                 n_workers);
  SemigroupEstimate e;
  e.value = r.mean;
  e.stderr_ = r.stderr_;
  e.n_mc = r.n_mc;
  e.k = m;
  e.phi_id = phi_id;
  return e;
}

}  // namespace ojasde
