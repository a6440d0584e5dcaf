#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ojasde/distribution.hpp"
#include "ojasde/matrix.hpp"
#include "ojasde/mc.hpp"
#include "ojasde/model.hpp"

namespace ojasde {

/// State of the discrete online-PCA Markov chain.
struct SgaState {
  Matrix w;
  std::size_t step_index = 0;
  double eta = 0.0;
  double fro_norm_sq = 0.0;

  SgaState(Matrix w0, double eta_)
      : w(std::move(w0)), eta(eta_), fro_norm_sq(frobenius_norm_sq(w)) {}
};

/// One step of the chain: W' = W + eta * G(x x^T, W). Deterministic given
/// (state, x).
inline SgaState sga_step(const SgaState& state, const std::vector<double>& x) {
  const std::size_t n = state.w.rows();
  if (x.size() != n) throw DimMismatch("sga_step: sample dimension");
  if (!(state.eta > 0.0) && state.eta != 0.0)
    throw ValidationError("sga_step: eta must be nonnegative");
  Matrix xxt(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) xxt(a, b) = x[a] * x[b];
  SgaState next = state;
  next.w = state.w + state.eta * g_drift(xxt, state.w);
  next.step_index = state.step_index + 1;
  next.fro_norm_sq = frobenius_norm_sq(next.w);
  return next;
}

/// Stability monitor output for one trajectory. A violation means some step
/// exceeded the per-step Frobenius inequality
/// ||W(k)||^2 <= (1 + (2M^2+1) eta) ||W(k-1)||^2 or the global bound
/// r^2 exp(T (2M^2+1)); it signals eta above the admissible threshold.
struct StabilityReport {
  std::vector<std::size_t> violations;
  double max_fro_sq = 0.0;
  double per_step_factor = 0.0;
  double global_bound = 0.0;
  bool ok() const { return violations.empty(); }
};

struct SgaTrajectory {
  std::vector<Matrix> w;  // w[k] after k steps, w[0] = W0
  std::vector<double> fro_sq;
  StabilityReport stability;
};

/// Simulate k_max steps with i.i.d. samples from ctx.dist, recording the
/// per-step norms and checking the stability bounds with r = ||W0||_F and
/// T = k_max * eta. A tiny relative slack keeps roundoff from raising
/// spurious flags.
inline SgaTrajectory sga_trajectory(const Matrix& w0, const ModelContext& ctx,
                                    double eta, std::size_t k_max,
                                    RngStream& rng) {
  if (!(eta >= 0.0)) throw ValidationError("sga_trajectory: eta < 0");
  const double m2 = ctx.dist.sup_norm() * ctx.dist.sup_norm();
  const double horizon = static_cast<double>(k_max) * eta;

  SgaTrajectory out;
  out.stability.per_step_factor = 1.0 + (2.0 * m2 + 1.0) * eta;
  out.stability.global_bound =
      frobenius_norm_sq(w0) * std::exp(horizon * (2.0 * m2 + 1.0));

  SgaState state(w0, eta);
  out.w.push_back(state.w);
  out.fro_sq.push_back(state.fro_norm_sq);
  out.stability.max_fro_sq = state.fro_norm_sq;
  const double slack = 1.0 + 1e-12;

  for (std::size_t k = 1; k <= k_max; ++k) {
    const std::vector<double> x = ctx.dist.sample(rng);
    const double prev = state.fro_norm_sq;
    state = sga_step(state, x);
    out.w.push_back(state.w);
    out.fro_sq.push_back(state.fro_norm_sq);
    out.stability.max_fro_sq =
        std::max(out.stability.max_fro_sq, state.fro_norm_sq);
    const bool per_step_bad =
        state.fro_norm_sq > out.stability.per_step_factor * prev * slack;
    const bool global_bad =
        state.fro_norm_sq > out.stability.global_bound * slack;
    if (per_step_bad || global_bad) out.stability.violations.push_back(k);
  }
  return out;
}

/// Final state of a monitored run without storing the path; same arithmetic
/// as sga_trajectory. Throws StabilityViolation at the first offending step.
inline SgaState sga_final_state(const Matrix& w0, const ModelContext& ctx,
                                double eta, std::size_t k_max, RngStream& rng) {
  const double m2 = ctx.dist.sup_norm() * ctx.dist.sup_norm();
  const double per_step = 1.0 + (2.0 * m2 + 1.0) * eta;
  const double global_bound =
      frobenius_norm_sq(w0) *
      std::exp(static_cast<double>(k_max) * eta * (2.0 * m2 + 1.0));
  const double slack = 1.0 + 1e-12;

  SgaState state(w0, eta);
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double prev = state.fro_norm_sq;
    state = sga_step(state, ctx.dist.sample(rng));
    if (state.fro_norm_sq > per_step * prev * slack ||
        state.fro_norm_sq > global_bound * slack)
      throw StabilityViolation("sga: stability bound exceeded at step " +
                                   std::to_string(k),
                               k);
  }
  return state;
}

// -- test-function registry ----------------------------------------------------

using TestFunction = std::function<double(const Matrix&)>;

/// Named bounded test functions so experiment configs stay serializable.
inline TestFunction test_function(const std::string& id) {
  if (id == "one") return [](const Matrix&) { return 1.0; };
  if (id == "w11") return [](const Matrix& w) { return w(0, 0); };
  if (id == "w12") return [](const Matrix& w) { return w(0, 1); };
  if (id == "w11_clip")
    return [](const Matrix& w) { return std::clamp(w(0, 0), -1.0, 1.0); };
  if (id == "w11w22")
    return [](const Matrix& w) { return w(0, 0) * w(1, 1); };
  if (id == "trace") return [](const Matrix& w) { return trace(w); };
  throw UnknownTestFunction("test_function: unknown id '" + id + "'");
}

/// sup |phi| over the reachable set for the registry's bounded entries;
/// used by the contraction check.
inline double test_function_bound(const std::string& id) {
  if (id == "one") return 1.0;
  if (id == "w11_clip") return 1.0;
  throw UnknownTestFunction("test_function_bound: '" + id +
                            "' has no declared bound");
}

/// Monte Carlo estimate of u^k(W0) = E[phi(W(k))] over n_mc independent
/// trajectories.
struct SemigroupEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n_mc = 0;
  std::size_t k = 0;
  std::string phi_id;
};

inline SemigroupEstimate semigroup_estimate(const std::string& phi_id,
                                            const Matrix& w0, std::size_t k,
                                            double eta, const ModelContext& ctx,
                                            std::uint64_t n_mc,
                                            std::uint64_t seed,
                                            unsigned n_workers = 0) {
  if (n_mc < 1) throw ValidationError("semigroup_estimate: n_mc must be >= 1");
  const TestFunction phi = test_function(phi_id);
  auto task = [&](std::uint64_t, RngStream& rng) {
    return phi(sga_final_state(w0, ctx, eta, k, rng).w);
  };
  const McResult r = mc_ensemble(task, n_mc, seed, n_workers);
  SemigroupEstimate e;
  e.value = r.mean;
  e.stderr_ = r.stderr_;
  e.n_mc = r.n_mc;
  e.k = k;
  e.phi_id = phi_id;
  return e;
}

}  // namespace ojasde
