#include <cmath>
#include <sstream>

#include <doctest.h>

#include "lowrank/factored.hpp"
#include "lowrank/rip.hpp"
#include "lowrank/solver.hpp"

using namespace lowrank;

namespace {

// f(M) = 1/2 (M - 1)^2, with M* = 1.
RecoveryProblem scalar_problem(double bound_d = 1.0) {
  auto loss = std::make_shared<const LinearLoss>(make_identity_operator(1, 1), Vector::Constant(1, 1.0));
  return RecoveryProblem(loss, Matrix::Constant(1, 1, 1.0), 1, 0.0, 1.0, 0.0, bound_d);
}

// Small Gaussian sensing instance whose delta is the exact constant over all
// symmetric matrices, so every inequality that assumes delta-RIP is in force.
struct SmallInstance {
  RecoveryProblem problem;
  Matrix x0;
};

SmallInstance small_instance(std::uint64_t seed) {
  const int n = 5, r = 1, p = 45;
  const LinearOperator raw = make_gaussian_operator(n, n, p, seed);
  const RipEstimate est = symmetric_rip_exact(raw);
  Rng rng(seed + 100);
  const Matrix z = rng.normal_matrix(n, r);
  const Matrix m_star = z * z.transpose();
  const auto loss = LinearLoss::from_ground_truth(raw.with_scale(est.scale), m_star);
  const double rho1 = estimate_rho1(*loss, r, est.delta, 100, seed);
  const Matrix x0 = rng.normal_matrix(n, r);
  const double d = std::max(m_star.norm(), (x0 * x0.transpose()).norm());
  return {RecoveryProblem(loss, m_star, r, est.delta, rho1, 0.0, d), x0};
}

}  // namespace

TEST_CASE("gradient descent") {
  SUBCASE("scalar double well from 0.9") {
    const RecoveryProblem p = scalar_problem();
    GdOptions o;
    o.eta = 0.05;
    o.max_iters = 200;
    o.dist_tol = 1e-9;
    const Trace tr = gradient_descent(p, Matrix::Constant(1, 1, 0.9), o);
    CHECK(tr.converged);
    CHECK(tr.iterations() <= 200);
    CHECK(std::abs(std::abs(tr.x_final(0, 0)) - 1.0) < 1e-9);
    for (std::size_t i = 1; i < tr.rows.size(); ++i) CHECK(tr.rows[i].f <= tr.rows[i - 1].f);
    CHECK(static_cast<long>(tr.rows.size()) == tr.iterations() + 1);
    CHECK(tr.phase2_start == 0);
  }
  SUBCASE("fixed point at the ground truth") {
    const RecoveryProblem p = scalar_problem();
    GdOptions o;
    o.eta = 0.05;
    o.grad_tol = 1e-12;
    const Trace tr = gradient_descent(p, Matrix::Constant(1, 1, 1.0), o);
    CHECK(tr.rows.size() == 1);
    CHECK(tr.rows[0].grad_norm == 0.0);
    CHECK(tr.converged);
  }
  SUBCASE("divergence raises with the iteration index") {
    const RecoveryProblem p = scalar_problem(100.0);
    GdOptions o;
    o.eta = 10.0;
    o.max_iters = 1000;
    try {
      gradient_descent(p, Matrix::Constant(1, 1, 2.0), o);
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      CHECK(e.iteration() > 0);
    }
  }
  SUBCASE("bad step") {
    GdOptions o;
    CHECK_THROWS_AS(gradient_descent(scalar_problem(), Matrix::Constant(1, 1, 0.5), o),
                    std::invalid_argument);
  }
}

TEST_CASE("perturbed GD parameters") {
  SUBCASE("confinement radius") {
    auto loss = std::make_shared<const LinearLoss>(make_identity_operator(1, 1), Vector::Constant(1, 1.0));
    const RecoveryProblem p(loss, Matrix::Constant(1, 1, 1.0), 1, 1.0 / 3.0, 5.0 / 3.0, 0.0, 1.0);
    CHECK(pgd_params(p, 0.5, 1.0, 0.1).R == doctest::Approx(6.0));
  }
  SUBCASE("Hessian Lipschitz constant and eps_hat branches") {
    const RecoveryProblem p = scalar_problem(2.0);
    const PgdParams a = pgd_params(p, 0.5, 1.0, 0.1);
    CHECK(a.R == doctest::Approx(6.0));
    CHECK(a.l2 == doctest::Approx(4.0 * std::sqrt(6.0) * 3.0));
    CHECK(std::abs(a.l2 - 29.39) < 5e-3);
    CHECK(a.eps_hat == doctest::Approx(1.0 / a.l2));
    const PgdParams b = pgd_params(p, 0.5, 100.0, 0.1);
    CHECK(b.eps_hat == doctest::Approx(100.0));
    CHECK(a.eta == doctest::Approx(0.5 / a.l1));
    CHECK(a.window == static_cast<long>(std::ceil(a.t_thres)));
  }
  SUBCASE("default kappa hits the window") {
    const SmallInstance inst = small_instance(3);
    for (long window : {20L, 100L, 500L}) {
      const PgdParams q = pgd_params(inst.problem, 0.5, default_kappa(inst.problem, 0.5, 0.1, window), 0.1);
      CHECK(q.t_thres == doctest::Approx(static_cast<double>(window)).epsilon(1e-9));
    }
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(pgd_params(scalar_problem(), 0.0, 1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(pgd_params(scalar_problem(), 0.5, -1.0, 0.1), std::invalid_argument);
  }
}

TEST_CASE("perturbed GD") {
  SUBCASE("start at the ground truth") {
    const SmallInstance inst = small_instance(4);
    const Matrix x0 = Eigen::SelfAdjointEigenSolver<Matrix>(inst.problem.m_star()).eigenvectors().rightCols(1) *
                      std::sqrt(inst.problem.m_star().trace());
    REQUIRE((x0 * x0.transpose() - inst.problem.m_star()).norm() < 1e-10);
    const PgdParams params =
        pgd_params(inst.problem, 0.5, default_kappa(inst.problem, 0.5, 0.1), 0.1);
    PgdOptions o;
    o.eps_target = 1e-8;
    o.max_iters = 10 * params.window;
    const Trace tr = perturbed_gd(inst.problem, x0, params, o);
    CHECK(tr.perturbations <= 1);
    CHECK(tr.phase2_start >= 0);
    CHECK(tr.converged);
    const double bound = params.w * params.w + 2.0 * params.w * x0.norm() * (1.0 + 1e-6);
    CHECK(tr.rows.back().dist <= bound);
  }
  SUBCASE("escapes the strict saddle at the origin") {
    // kappa below |lambda_min| = 2, so the origin counts as a strict saddle.
    const RecoveryProblem p = scalar_problem();
    const PgdParams params = pgd_params(p, 0.5, 1.0, 0.1);
    PgdOptions o;
    o.eps_target = 1e-8;
    o.max_iters = 1000000;
    o.seed = 5;
    o.check_invariants = true;
    const Trace tr = perturbed_gd(p, Matrix::Zero(1, 1), params, o);
    CHECK(tr.perturbations >= 1);
    CHECK(tr.rows.front().perturbed);
    CHECK(tr.converged);
    const double x = tr.x_final(0, 0);
    CHECK(std::abs(x * x - 1.0) <= 1e-8);
    CHECK(tr.invariants.descent_violations == 0);
  }
  SUBCASE("random start satisfies the runtime invariants") {
    const SmallInstance inst = small_instance(6);
    const PgdParams params = pgd_params(inst.problem, 0.5, default_kappa(inst.problem, 0.5, 0.1), 0.1);
    PgdOptions o;
    o.eps_target = 1e-8;
    o.max_iters = 2000000;
    o.seed = 1;
    o.check_invariants = true;
    const Trace tr = perturbed_gd(inst.problem, inst.x0, params, o);
    CHECK(tr.converged);
    CHECK(tr.invariants.checked);
    CHECK(tr.invariants.descent_steps > 0);
    CHECK(tr.invariants.descent_violations == 0);
    CHECK(tr.invariants.confinement_violations == 0);
    CHECK(tr.invariants.levelset_violations == 0);
    for (const auto& row : tr.rows) {
      CHECK(row.dist >= 0.0);
      if (row.t >= tr.phase2_start) CHECK(row.phase == 2);
    }
  }
  SUBCASE("budget exhausted in phase 1") {
    const SmallInstance inst = small_instance(7);
    const PgdParams params = pgd_params(inst.problem, 0.5, default_kappa(inst.problem, 0.5, 0.1), 0.1);
    PgdOptions o;
    o.max_iters = 5;
    const Trace tr = perturbed_gd(inst.problem, inst.x0, params, o);
    CHECK(tr.budget_exhausted);
    CHECK(tr.phase1_incomplete);
    CHECK_FALSE(tr.converged);
    CHECK(tr.rows.size() == 6);
  }
  SUBCASE("start outside the D ball") {
    const RecoveryProblem p = scalar_problem();
    const PgdParams params = pgd_params(p, 0.5, 1.0, 0.1);
    CHECK_THROWS_AS(perturbed_gd(p, Matrix::Constant(1, 1, 3.0), params, PgdOptions{}),
                    std::invalid_argument);
  }
}

TEST_CASE("second-order check") {
  const RecoveryProblem p = scalar_problem();
  CHECK(check_second_order(p, Matrix::Constant(1, 1, 1.0), 1e-6));
  CHECK_FALSE(check_second_order(p, Matrix::Zero(1, 1), 1.9));
  CHECK(check_second_order(p, Matrix::Zero(1, 1), 2.1));
  Rng rng(8);
  const SmallInstance inst = small_instance(9);
  for (int k = 0; k < 5; ++k) CHECK(check_second_order(inst.problem, rng.normal_matrix(5, 1), 1e12));
}

TEST_CASE("uniform ball") {
  Rng rng(10);
  const int rows = 2, cols = 2, dim = rows * cols;
  double mean = 0.0;
  const int draws = 4000;
  for (int k = 0; k < draws; ++k) {
    const Matrix x = uniform_ball(rng, rows, cols, 3.0);
    REQUIRE(x.norm() <= 3.0);
    mean += std::pow(x.norm() / 3.0, dim);  // uniform on [0, 1] for a uniform ball sample
  }
  CHECK(std::abs(mean / draws - 0.5) < 0.03);
}

TEST_CASE("trace CSV") {
  Trace tr;
  tr.rows.push_back({0, 0.1, 1.0 / 3.0, 2.5e-17, false, false, 1});
  tr.rows.push_back({1, 0.05, 0.2, 1e-300, true, true, 1});
  tr.rows.push_back({2, 0.025, 0.1, 0.0, true, false, 2});
  std::ostringstream os;
  write_trace_csv(tr, os);
  const std::string text = os.str();
  CHECK(text.rfind(std::string(kTraceHeader) + "\n", 0) == 0);
  std::istringstream is(text);
  const Trace back = read_trace_csv(is);
  REQUIRE(back.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.rows[i].t == tr.rows[i].t);
    CHECK(back.rows[i].f == tr.rows[i].f);
    CHECK(back.rows[i].grad_norm == tr.rows[i].grad_norm);
    CHECK(back.rows[i].dist == tr.rows[i].dist);
    CHECK(back.rows[i].in_region == tr.rows[i].in_region);
    CHECK(back.rows[i].perturbed == tr.rows[i].perturbed);
    CHECK(back.rows[i].phase == tr.rows[i].phase);
  }
  CHECK(back.region_entry() == 1);
  std::istringstream bad("t,f\n1,2\n");
  CHECK_THROWS(read_trace_csv(bad));
}

TEST_CASE("line fits") {
  const LineFit exact = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(exact.slope == doctest::Approx(2.0));
  CHECK(exact.intercept == doctest::Approx(1.0));
  CHECK(exact.r2 == doctest::Approx(1.0));
  Trace tr;
  for (long t = 0; t < 50; ++t) tr.rows.push_back({t, 0.0, 0.0, std::pow(10.0, 2.0 - 0.01 * t), false, false, 2});
  const LineFit f = fit_log_dist(tr, 10);
  CHECK(f.slope == doctest::Approx(-0.01));
  CHECK(f.intercept == doctest::Approx(2.0));
  CHECK(f.r2 == doctest::Approx(1.0));
}
