#include <cmath>

#include <doctest.h>

#include "lowrank/certify.hpp"
#include "lowrank/factored.hpp"
#include "lowrank/rip.hpp"
#include "oracles.hpp"

using namespace lowrank;

namespace {

const double kS = std::sqrt(2.0) - 1.0;

const CertificateCheck& find_check(const CertificateReport& rep, const std::string& name) {
  for (const auto& c : rep.checks)
    if (c.name == name) return c;
  FAIL("missing check " << name);
  return rep.checks.front();
}

Matrix random_orthogonal(Rng& rng, int r) {
  return Eigen::HouseholderQR<Matrix>(rng.normal_matrix(r, r)).householderQ();
}

}  // namespace

TEST_CASE("vectorization helpers") {
  Rng rng(31);
  SUBCASE("scalar X operator") {
    const Matrix xop = x_operator(Matrix::Constant(1, 1, 1.5));
    CHECK(xop.rows() == 1);
    CHECK(xop(0, 0) == doctest::Approx(3.0));
  }
  SUBCASE("defining property and norm") {
    const Matrix x = rng.normal_matrix(4, 2);
    const Matrix xop = x_operator(x);
    for (int k = 0; k < 5; ++k) {
      const Matrix u = rng.normal_matrix(4, 2);
      const Matrix s = x * u.transpose() + u * x.transpose();
      CHECK((xop * vec(u) - vec(s)).norm() <= 1e-12 * s.norm());
      CHECK((xop * vec(u)).norm() == doctest::Approx(s.norm()));
    }
    CHECK_THROWS_AS(x_operator(rng.normal_matrix(11, 1)), std::length_error);
  }
  SUBCASE("sym_mat and kron") {
    const Matrix a = rng.normal_matrix(3, 3);
    CHECK((sym_mat(vec(a)) - sym_part(a)).norm() < 1e-15);
    const Matrix b = rng.normal_matrix(2, 2);
    const Matrix c = rng.normal_matrix(2, 3);
    // vec(B C A^T) = (A (x) B) vec(C)
    const Matrix a23 = rng.normal_matrix(2, 3);
    CHECK((kron(a23, b) * vec(c) - vec(b * c * a23.transpose())).norm() < 1e-12);
  }
  SUBCASE("positive and negative parts") {
    const Matrix a = rng.normal_matrix(5, 5);
    const Matrix m = a + a.transpose();
    const PsdSplit s = psd_split(m);
    CHECK((s.plus - s.minus - m).norm() < 1e-12 * m.norm());
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(s.plus).eigenvalues().minCoeff() >= -1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(s.minus).eigenvalues().minCoeff() >= -1e-12);
    CHECK(std::abs(frob_inner(s.plus, s.minus)) < 1e-10 * m.squaredNorm());
  }
  SUBCASE("Gauss-Legendre is exact to degree 2k - 1") {
    for (int k : {1, 4, 16, 32}) {
      const auto [nodes, weights] = gauss_legendre(k);
      CHECK(weights.sum() == doctest::Approx(1.0));
      for (int deg = 0; deg <= 2 * k - 1; ++deg) {
        double q = 0.0;
        for (Eigen::Index i = 0; i < nodes.size(); ++i) q += weights(i) * std::pow(nodes(i), deg);
        CHECK(q == doctest::Approx(1.0 / (deg + 1)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("mean-value Hessian") {
  Rng rng(32);
  SUBCASE("linear loss gives the scaled Gram matrix") {
    const LinearOperator op = make_gaussian_operator(3, 3, 8, 2).with_scale(0.6);
    const auto loss = LinearLoss::from_ground_truth(op, Matrix::Identity(3, 3));
    const Matrix h = mean_hessian(*loss, rng.normal_matrix(3, 1), Matrix::Identity(3, 3));
    Matrix gram = Matrix::Zero(9, 9);
    for (Eigen::Index i = 0; i < op.count(); ++i) {
      const Vector a = vec(op.sensing_matrix(i));
      gram += a * a.transpose();
    }
    CHECK((h - 0.36 * gram).norm() <= 1e-12 * gram.norm());
    const Matrix h2 = mean_hessian(*loss, rng.normal_matrix(3, 1), Matrix::Identity(3, 3));
    CHECK((h - h2).norm() <= 1e-12 * h.norm());
  }
  SUBCASE("one-bit quadrature converges") {
    const Matrix z = rng.normal_matrix(3, 2);
    const Matrix m_star = z * z.transpose();
    const auto loss = make_onebit_loss(m_star);
    const Matrix x = rng.normal_matrix(3, 2);
    const Matrix h16 = mean_hessian(*loss, x, m_star, 16);
    const Matrix h32 = mean_hessian(*loss, x, m_star, 32);
    CHECK((h16 - h16.transpose()).norm() <= 1e-12 * h16.norm());
    CHECK((h16 - h32).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("gradient/Hessian certificate") {
  Rng rng(33);
  const int n = 4, r = 2;
  const LinearOperator raw = make_gaussian_operator(n, n, n * (n + 1), 5);
  const RipEstimate est = symmetric_rip_exact(raw);
  const Matrix z = rng.normal_matrix(n, r);
  const Matrix m_star = z * z.transpose();
  const auto loss = LinearLoss::from_ground_truth(raw.with_scale(est.scale), m_star);
  SUBCASE("at the ground truth") {
    const CertificateReport rep = verify_gradhessian(*loss, z, m_star, est.delta);
    CHECK(rep.pass());
    CHECK(find_check(rep, "XtHe_le_grad").lhs < 1e-10);
  }
  SUBCASE("equality probe for exact linear measurements") {
    for (int k = 0; k < 10; ++k) {
      const Matrix x = rng.normal_matrix(n, r);
      const CertificateReport rep = verify_gradhessian(*loss, x, m_star, est.delta);
      const CertificateCheck& c = find_check(rep, "XtHe_le_grad");
      CHECK(c.lhs == doctest::Approx(g_grad(*loss, x).norm()).epsilon(1e-10));
      CHECK(c.lhs == doctest::Approx(c.rhs).epsilon(1e-10));
      CHECK(rep.pass());
    }
  }
  SUBCASE("suite") {
    const SuiteSummary s = gradhessian_suite(20, 4);
    CHECK(s.instances == 20);
    CHECK(s.ok());
  }
}

TEST_CASE("alignment") {
  Rng rng(34);
  SUBCASE("self alignment") {
    const Matrix x = rng.normal_matrix(4, 2);
    CHECK((align(x, x) - x).norm() < 1e-12);
  }
  SUBCASE("sign flip") {
    const Matrix x = rng.normal_matrix(3, 1);
    const Matrix za = align(x, -x);
    CHECK((za - x).norm() < 1e-12);
    CHECK((x.transpose() * za)(0, 0) == doctest::Approx(x.squaredNorm()));
  }
  SUBCASE("random pairs") {
    for (int k = 0; k < 50; ++k) {
      const Matrix x = rng.normal_matrix(5, 3);
      const Matrix z = rng.normal_matrix(5, 3);
      const Matrix za = align(x, z);
      const Matrix p = x.transpose() * za;
      CHECK((p - p.transpose()).norm() <= 1e-10);
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(sym_part(p)).eigenvalues().minCoeff() >= -1e-10);
      CHECK((za * za.transpose() - z * z.transpose()).norm() < 1e-10 * z.squaredNorm());
    }
  }
}

TEST_CASE("PL dual certificate") {
  Rng rng(35);
  const Matrix z = rng.normal_matrix(4, 2);
  const double sr = sigma(z * z.transpose(), 2);
  const double c_tilde = 0.5 * pl_radius_sym(0.3, sr);
  SUBCASE("near-coincident limit") {
    const Matrix x = z + 1e-6 * rng.normal_matrix(4, 2);
    const CertificateReport rep = pl_dual_bound(x, z, 0.0, c_tilde, sr);
    CHECK(rep.cos_theta == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(rep.objective < 1e-4);
    CHECK(rep.pass());
  }
  SUBCASE("mu' = 0 reduces to the q1 bound") {
    for (int k = 0; k < 20; ++k) {
      Matrix step = rng.normal_matrix(4, 2);
      step *= rng.uniform(0.05, 1.0) * c_tilde / step.norm();
      const CertificateReport rep = pl_dual_bound(z + step, z, 0.0, c_tilde, sr);
      CHECK(rep.q2 == 0.0);
      CHECK(rep.q1 == doctest::Approx(std::sqrt(1.0 - c_tilde * c_tilde / (2.0 * kS * sr))));
      CHECK(rep.objective == doctest::Approx((1 - rep.cos_theta) / (1 + rep.cos_theta)));
      CHECK(rep.objective <= (1 - rep.q1) / (1 + rep.q1) + 1e-8);
    }
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(pl_dual_bound(z, z, 0.0, c_tilde, sr), std::invalid_argument);
    CHECK_THROWS_AS(pl_dual_bound(z + rng.normal_matrix(4, 2), z, 0.0, 1e-3, sr), std::invalid_argument);
    CHECK_THROWS_AS(pl_dual_bound(z, z, -1.0, c_tilde, sr), std::invalid_argument);
    CHECK_THROWS_AS(pl_dual_bound(z, z, 0.0, 10.0 * std::sqrt(sr), sr), std::invalid_argument);
  }
  SUBCASE("suite") {
    const SuiteSummary s = pl_dual_suite(50, 7);
    CHECK(s.ok());
    CHECK(s.construction_gaps == 0);
  }
}

TEST_CASE("saddle eta0") {
  Rng rng(36);
  SUBCASE("range of Z inside range of X") {
    const Matrix x = rng.normal_matrix(4, 2);
    Matrix b(2, 2);
    b << 1.5, 0.3, -0.2, 0.7;
    const CertificateReport rep = saddle_eta0(x, x * b);
    CHECK(rep.special_case);
    CHECK(rep.eta0 == 0.0);
    CHECK(rep.pass());
  }
  SUBCASE("orthogonal ranges") {
    Matrix x = Matrix::Zero(2, 1), z = Matrix::Zero(2, 1);
    x(0, 0) = 1.0;
    z(1, 0) = 1.0;
    const CertificateReport rep = saddle_eta0(x, z);
    CHECK_FALSE(rep.special_case);
    CHECK(rep.alpha == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(rep.beta == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(rep.eta0 == doctest::Approx(oracle::eta0_grid(rep.alpha, rep.beta)).epsilon(1e-9));
    CHECK(rep.eta0 <= 1.0 / 3.0 + 1e-8);
  }
  SUBCASE("closed form equals the minimized objective") {
    for (int k = 0; k < 100; ++k) {
      const int n = 2 + k % 5, r = 1 + k % std::min(3, n - 1);
      const Matrix x = rng.normal_matrix(n, r);
      const Matrix z = rng.normal_matrix(n, r);
      const CertificateReport rep = saddle_eta0(x, z);
      const oracle::AlphaBeta ab = oracle::alpha_beta(x, z);
      CHECK(rep.alpha == doctest::Approx(ab.alpha).epsilon(1e-8));
      CHECK(rep.beta == doctest::Approx(ab.beta).epsilon(1e-8));
      CHECK(std::abs(rep.eta0 - oracle::eta0_grid(ab.alpha, ab.beta)) <= 1e-8);
      CHECK(rep.eta0 <= 1.0 / 3.0 + 1e-8);
      CHECK(eta0_objective(rep.alpha, rep.beta, 0.5) >= rep.eta0 - 1e-12);
      CHECK(rep.pass());
    }
  }
  SUBCASE("slack term when kappa and zeta are given") {
    const Matrix x = rng.normal_matrix(3, 1), z = rng.normal_matrix(3, 1);
    const CertificateReport rep = saddle_eta0(x, z, 0.1, 2.0);
    const double e = (x * x.transpose() - z * z.transpose()).norm();
    CHECK(rep.slack == doctest::Approx((1.0 + std::sqrt(2.0) / 2.0) * 0.1 / e));
    CHECK(std::isnan(saddle_eta0(x, z).slack));
  }
  SUBCASE("suite") {
    const SuiteSummary s = saddle_suite(100, 2);
    CHECK(s.ok());
    CHECK(s.worst_value <= 1.0 / 3.0 + 1e-8);
  }
}

TEST_CASE("norm comparison") {
  Rng rng(37);
  SUBCASE("equal factors") {
    const Matrix x = rng.normal_matrix(3, 2);
    const CertificateReport rep = normcompare_report(x, x);
    CHECK(rep.checks.front().lhs == doctest::Approx(0.0));
    CHECK(rep.checks.front().rhs == doctest::Approx(0.0));
    CHECK(normcompare_check(x, x));
  }
  SUBCASE("scalars") {
    const CertificateReport rep = normcompare_report(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0));
    CHECK(rep.checks.front().lhs == doctest::Approx(1.0));
    CHECK(rep.checks.front().rhs == doctest::Approx(9.0 / (2.0 * kS)));
    CHECK(std::abs(rep.checks.front().rhs - 10.86) < 5e-3);
  }
  SUBCASE("requires aligned pairs") {
    const Matrix x = rng.normal_matrix(4, 2);
    const Matrix z = x * random_orthogonal(rng, 2);
    CHECK_THROWS_AS(normcompare_check(x, -x), std::invalid_argument);
    CHECK(normcompare_check(x, align(x, z)));
  }
  SUBCASE("random aligned pairs") {
    for (int k = 0; k < 200; ++k) {
      const Matrix x = rng.normal_matrix(5, 2);
      CHECK(normcompare_check(x, align(x, rng.normal_matrix(5, 2))));
    }
    CHECK(normcompare_suite(200, 3).ok());
  }
}
