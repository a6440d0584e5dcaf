#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ojasde/distribution.hpp"
#include "ojasde/mc.hpp"
#include "ojasde/model.hpp"
#include "ojasde/rng.hpp"
#include "ojasde/sde.hpp"

using namespace ojasde;

namespace {

DistributionSpec example_dist() {
  return DistributionSpec::product_uniform({2.0, 1.0});
}

ModelContext example_ctx() { return exact_moments(example_dist()); }

Matrix zero_db(std::size_t n) { return Matrix(n, n); }

// Haar start restricted to SO(2): flip one column when det is negative.
Matrix haar_so2(RngStream& rng) {
  Matrix w = haar_orthogonal(2, rng);
  const double det = w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0);
  if (det < 0.0)
    for (std::size_t i = 0; i < 2; ++i) w(i, 1) = -w(i, 1);
  return w;
}

}  // namespace

TEST_CASE("make_sde_model") {
  const ModelContext ctx = example_ctx();
  SECTION("eta = 0 first-order degenerates to the mean ODE") {
    const SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 0.0);
    RngStream rng(301, 0);
    const Matrix w = haar_orthogonal(2, rng);
    CHECK(max_abs(m.drift(w) - g_drift(ctx.a, w)) == 0.0);
    CHECK(max_abs(m.noise(w, rng.normal_matrix(2, 2))) == 0.0);
  }
  SECTION("langevin with zero potential has zero drift, projected noise") {
    const SdeModel m = make_langevin_model(ctx, "zero", 0.7);
    RngStream rng(307, 0);
    const Matrix q = haar_orthogonal(2, rng);
    CHECK(max_abs(m.drift(q)) == 0.0);
    const Matrix db = rng.normal_matrix(2, 2);
    const Matrix expect = 0.7 * apply_projection(q, db);
    CHECK(max_abs(m.noise(q, db) - expect) <= 1e-15);
  }
  SECTION("unstable model with a degenerate law reduces to an ODE") {
    const ModelContext zero_ctx = exact_moments(
        DistributionSpec::finite_atoms({{0.0, 0.0}}, {1.0}));
    const SdeModel m = make_sde_model(SdeModel::Kind::Unstable, zero_ctx, 0.1);
    const Matrix w = Matrix::identity(2);
    CHECK(max_abs(m.noise(w, Matrix::identity(2))) <= 1e-12);
    // drift = G + eta L with J = 0, and G = 0 for A = 0.
    CHECK(max_abs(m.drift(w)) <= 1e-10);
  }
  SECTION("negative eta and unknown potential are rejected") {
    CHECK_THROWS_AS(make_sde_model(SdeModel::Kind::FirstOrder, ctx, -0.1),
                    NegativeEta);
    CHECK_THROWS_AS(make_langevin_model(ctx, "bogus", 1.0), UnknownPotential);
  }
}

TEST_CASE("sde_step") {
  const ModelContext ctx = example_ctx();
  SECTION("zero noise, diagonal A: the identity is an equilibrium") {
    SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 0.0, false);
    const Matrix w = sde_step(m, Matrix::identity(2), 0.01, zero_db(2));
    CHECK(max_abs(w - Matrix::identity(2)) == 0.0);
  }
  SECTION("retraction keeps the defect at machine precision") {
    SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 0.1, true);
    RngStream rng(311, 0);
    Matrix w = haar_orthogonal(2, rng);
    for (int k = 0; k < 200; ++k) {
      Matrix db = rng.normal_matrix(2, 2);
      for (std::size_t q = 0; q < 4; ++q) db[q] *= 0.1;  // sqrt(dt), dt = 0.01
      w = sde_step(m, w, 0.01, db);
      CHECK(orthogonality_defect(w) <= 1e-12);
    }
  }
  SECTION("retraction off: ensemble-mean terminal defect scales like dt^2") {
    // Small eta: the Heun noise term carries its own O(eta dt) defect, so the
    // O(dt^2) drift-dominated regime needs the noise weak.
    SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 5e-4, false);
    auto mean_defect = [&](double dt) {
      auto task = [&](std::uint64_t, RngStream& rng) {
        const Matrix w0 = haar_so2(rng);
        auto path = simulate_path(m, w0, dt,
                                  static_cast<std::size_t>(1.0 / dt), rng,
                                  static_cast<std::size_t>(1.0 / dt));
        return path.back().defect;
      };
      return mc_ensemble(task, 80, 313, 0).mean;
    };
    const double d1 = mean_defect(0.01);
    const double d2 = mean_defect(0.005);
    CHECK(d1 / d2 >= 3.0);
    CHECK(d1 / d2 <= 5.0);
  }
  SECTION("blow-up guard") {
    SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 0.0, false);
    Matrix huge = 1e7 * Matrix::identity(2);
    CHECK_THROWS_AS(sde_step(m, huge, 0.1, zero_db(2)), NonFiniteState);
  }
}

TEST_CASE("ito_step") {
  const ModelContext ctx = example_ctx();
  SECTION("degenerate law: deterministic Euler on G") {
    const ModelContext zero_ctx = exact_moments(
        DistributionSpec::finite_atoms({{0.0, 0.0}}, {1.0}));
    SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, zero_ctx, 0.1, false);
    const Matrix w0 = Matrix::identity(2);
    const Matrix w1 = ito_step(m, w0, 0.01, Matrix::identity(2));
    // K = 0 so the noise contributes nothing; J = 0 so drift is plain G = 0.
    CHECK(max_abs(w1 - w0) <= 1e-12);
  }
  SECTION("eta = 0 reduces to deterministic Euler on G") {
    SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 0.0, false);
    RngStream rng(317, 0);
    const Matrix w0 = haar_so2(rng);
    const Matrix w1 = ito_step(m, w0, 0.01, rng.normal_matrix(2, 2));
    const Matrix euler = w0 + 0.01 * g_drift(ctx.a, w0);
    CHECK(max_abs(w1 - euler) <= 1e-12);
  }
  SECTION("weak statistics agree with the Stratonovich integrator") {
    const double eta = 0.1, t_final = 0.5, dt = 0.01;
    const auto n_steps = static_cast<std::size_t>(t_final / dt);
    const Matrix w0 = Matrix(2, 2, {std::cos(1.0), std::sin(1.0),
                                    -std::sin(1.0), std::cos(1.0)});
    SdeModel strat = make_sde_model(SdeModel::Kind::FirstOrder, ctx, eta, true);
    SdeModel ito = strat;

    auto run = [&](bool use_ito, std::uint64_t seed) {
      auto task = [&, use_ito](std::uint64_t, RngStream& rng) {
        Matrix w = w0;
        for (std::size_t k = 0; k < n_steps; ++k) {
          Matrix db = rng.normal_matrix(2, 2);
          for (std::size_t q = 0; q < 4; ++q) db[q] *= std::sqrt(dt);
          w = use_ito ? ito_step(ito, w, dt, db) : sde_step(strat, w, dt, db);
        }
        return w(0, 0);
      };
      return mc_ensemble(task, 4000, seed, 0);
    };
    const McResult a = run(false, 331);
    const McResult b = run(true, 337);
    const double pooled = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
    CHECK(std::abs(a.mean - b.mean) <= 3.0 * pooled + 5.0 * dt);
  }
  SECTION("off-manifold input is rejected") {
    SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 0.1, false);
    CHECK_THROWS_AS(ito_step(m, 1.5 * Matrix::identity(2), 0.01, zero_db(2)),
                    NotOnManifold);
  }
}

TEST_CASE("retraction") {
  RngStream rng(347, 0);
  SECTION("fixes points on the manifold") {
    for (int rep = 0; rep < 10; ++rep) {
      const Matrix w = haar_orthogonal(3, rng);
      CHECK(max_abs(retraction(w) - w) <= 1e-14);
    }
  }
  SECTION("removes scaling") {
    const Matrix r = retraction(2.0 * Matrix::identity(3));
    CHECK(max_abs(r - Matrix::identity(3)) <= 1e-14);
  }
  SECTION("skew perturbations move the retraction by O(eps^2)") {
    const double eps = 1e-3;
    const Matrix s(2, 2, {0.0, 1.0, -1.0, 0.0});
    const Matrix w = Matrix::identity(2) + eps * s;
    const Matrix r = retraction(w);
    CHECK(frobenius_norm(r - w) <= 10.0 * eps * eps);
    CHECK(orthogonality_defect(r) <= 1e-14);
  }
  SECTION("rank-deficient states are rejected") {
    CHECK_THROWS_AS(retraction(Matrix(2, 2, {1.0, 0.0, 0.0, 0.0})),
                    SingularState);
  }
}

TEST_CASE("ode_rk4_step") {
  SECTION("identity equilibrium for diagonal A") {
    const ModelContext ctx = example_ctx();
    const Matrix w = ode_rk4_step(Matrix::identity(2), 0.01, ctx);
    CHECK(max_abs(w - Matrix::identity(2)) == 0.0);
  }
  SECTION("flow converges to the signed eigenbasis, descending order") {
    const auto dist = DistributionSpec::product_uniform(
        {3.0, 2.44948974278317809820, 1.73205080756887729353});
    // Half-widths chosen so A = diag(3, 2, 1).
    const ModelContext ctx = exact_moments(dist);
    CHECK(ctx.a(0, 0) == Catch::Approx(3.0).epsilon(1e-12));
    CHECK(ctx.a(1, 1) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(ctx.a(2, 2) == Catch::Approx(1.0).epsilon(1e-12));
    RngStream rng(349, 0);
    for (int start = 0; start < 5; ++start) {
      Matrix w = haar_orthogonal(3, rng);
      for (int k = 0; k < 5000; ++k) w = ode_rk4_step(w, 0.01, ctx, true);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          const double target = i == j ? 1.0 : 0.0;
          CHECK(std::abs(std::abs(w(i, j)) - target) <= 1e-6);
        }
    }
  }
  SECTION("halving dt shrinks the error about sixteenfold") {
    const ModelContext ctx = example_ctx();
    RngStream rng(353, 0);
    const Matrix w0 = haar_orthogonal(2, rng);
    auto integrate = [&](double dt) {
      Matrix w = w0;
      const auto n = static_cast<std::size_t>(std::llround(1.0 / dt));
      for (std::size_t k = 0; k < n; ++k) w = ode_rk4_step(w, dt, ctx);
      return w;
    };
    const Matrix ref = integrate(0.0025);
    const double e1 = frobenius_norm(integrate(0.04) - ref);
    const double e2 = frobenius_norm(integrate(0.02) - ref);
    CHECK(e1 / e2 >= 10.0);
    CHECK(e1 / e2 <= 22.0);
  }
}

TEST_CASE("riccati consistency of the generic model") {
  // d(W W^T)/dt = A X + X A - 2 X A X with X = W W^T holds for any W; the
  // projected eta-term cancels exactly by the w P identity.
  const ModelContext ctx = example_ctx();
  SdeModel m = make_sde_model(SdeModel::Kind::Generic, ctx, 0.3, false);
  const Matrix f0(2, 2, {0.4, -1.1, 0.7, 0.2});
  m.f_field = [f0](const Matrix&) { return f0; };
  m.h_field = [](const Matrix& w) {
    return Tensor4(w.rows(), w.cols(), w.rows(), w.cols());
  };
  RngStream rng(359, 0);
  Matrix w0(2, 2);
  for (std::size_t k = 0; k < 4; ++k) w0[k] = rng.normal();  // off-manifold

  const double dt = 1e-5;
  const Matrix w1 = sde_step(m, w0, dt, zero_db(2));
  const Matrix x0 = matmul(w0, transpose(w0));
  const Matrix x1 = matmul(w1, transpose(w1));
  const Matrix fd = (1.0 / dt) * (x1 - x0);
  const Matrix ax = matmul(ctx.a, x0);
  const Matrix rhs = ax + transpose(ax) - 2.0 * matmul(x0, matmul(ctx.a, x0));
  CHECK(max_abs(fd - rhs) <= 1e-3);
}

TEST_CASE("langevin gradient flow decreases the potential") {
  const ModelContext ctx = example_ctx();
  const SdeModel m = make_langevin_model(ctx, "oja_brockett", 0.0, false,
                                         {2.0, 1.0});
  RngStream rng(367, 0);
  for (int start = 0; start < 5; ++start) {
    Matrix q = haar_orthogonal(2, rng);
    double u_prev = m.potential.value(q);
    for (int k = 0; k < 1000; ++k) {
      q = rk4_step_field(q, 0.01, [&](const Matrix& v) { return m.drift(v); });
      q = retraction(q);
      const double u = m.potential.value(q);
      CHECK(u <= u_prev + 1e-12);
      u_prev = u;
    }
    // Terminal point is an eigenbasis: a signed identity up to saddle escape.
    CHECK(std::abs(std::abs(q(0, 0)) - 1.0) <= 1e-3);
  }
}

TEST_CASE("simulate_path records defects") {
  const ModelContext ctx = example_ctx();
  const SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 0.05, true);
  RngStream rng(373, 0);
  const auto path = simulate_path(m, Matrix::identity(2), 0.01, 50, rng, 10);
  REQUIRE(path.size() >= 6);
  CHECK(path.front().t == 0.0);
  CHECK(path.back().t == Catch::Approx(0.5));
  for (const auto& pt : path) CHECK(pt.defect <= 1e-12);
}

TEST_CASE("feynman_kac_estimate") {
  const ModelContext ctx = example_ctx();
  const SdeModel m = make_sde_model(SdeModel::Kind::FirstOrder, ctx, 0.05, true);
  SECTION("t = 0 evaluates phi at the start") {
    const SemigroupEstimate e =
        feynman_kac_estimate("w11", Matrix::identity(2), 0.0, m, 0.01, 32, 11);
    CHECK(e.value == 1.0);
    CHECK(e.stderr_ == 0.0);
  }
  SECTION("phi = 1 is exact") {
    const SemigroupEstimate e =
        feynman_kac_estimate("one", Matrix::identity(2), 0.1, m, 0.01, 32, 11);
    CHECK(e.value == 1.0);
    CHECK(e.stderr_ == 0.0);
  }
  SECTION("t must be a multiple of dt") {
    CHECK_THROWS_AS(
        feynman_kac_estimate("one", Matrix::identity(2), 0.105, m, 0.01, 8, 1),
        ValidationError);
  }
}
