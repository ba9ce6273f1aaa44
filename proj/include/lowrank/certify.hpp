#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/losses.hpp"

namespace lowrank {

/// Column-major vectorization.
Vector vec(const Matrix& a);
/// mat_S: reshapes an n^2 vector to n x n and returns its symmetric part.
Matrix sym_mat(const Vector& v);
Matrix kron(const Matrix& a, const Matrix& b);

/// Default bound on n^2 for the dense n^2-dimensional certificate algebra.
inline constexpr Eigen::Index kDenseVecLimit = 100;

/// The n^2 x nr matrix with X_op vec(U) = vec(XU^T + UX^T).
Matrix x_operator(const Matrix& x, Eigen::Index dense_limit = kDenseVecLimit);

struct PsdSplit {
  Matrix plus;   ///< [M]_+
  Matrix minus;  ///< [M]_-, so M = plus - minus
};
/// Eigenvalues within 1e-12 (relative to the largest magnitude) of zero are
/// dropped from both parts.
PsdSplit psd_split(const Matrix& m);

/// Gauss-Legendre nodes and weights on [0, 1].
std::pair<Vector, Vector> gauss_legendre(int points);

/// H with vec(K)^T H vec(L) = int_0^1 [Hess f((1-t)XX^T + t M*)](K, L) dt.
Matrix mean_hessian(const MatrixLoss& loss, const Matrix& x, const Matrix& m_star,
                    int quad_points = 16, Eigen::Index dense_limit = kDenseVecLimit);

struct CertificateCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// Quantities and verdicts of one certificate evaluation. Fields that a
/// given check does not produce stay NaN.
struct CertificateReport {
  std::string kind;
  std::uint64_t instance = 0;

  double q1;
  double q2;
  double alpha;
  double beta;
  double eta0;
  double cos_theta;
  double objective;
  double bound;
  double slack;  ///< Gamma kappa/||e|| for saddle_eta0 when kappa and zeta are given

  /// saddle_eta0: the P_perp Z = 0 branch was taken.
  bool special_case = false;
  /// pl_dual_bound: no admissible y was found; not a bound violation.
  bool construction_gap = false;
  /// pl_dual_bound: "least_squares" or "aligned_difference".
  std::string y_source;

  std::vector<CertificateCheck> checks;

  CertificateReport();
  void add(std::string name, double lhs, double rhs, double tol);
  bool pass() const;
  /// Smallest rhs - lhs over all checks.
  double worst_margin() const;
};

/// Checks ||X_op^T H e|| <= ||grad g(X)||_F and
/// lambda_min(2 I (x) mat_S(He) + (1 + delta) X_op^T X_op) >= lambda_min(Hess g(X)) - 1e-8
/// with H the mean-value Hessian. delta must bound the RIP constant of the
/// Hessian on the relevant matrices.
CertificateReport verify_gradhessian(const MatrixLoss& loss, const Matrix& x,
                                     const Matrix& m_star, double delta, int quad_points = 16);

/// Z R with R = Q P^T from the SVD X^T Z = P D Q^T, so that X^T Z R is
/// symmetric positive semidefinite.
Matrix align(const Matrix& x, const Matrix& z);

/// Evaluates the closed-form dual certificate bounding the first-order RIP
/// threshold near Z, with ZZ^T = M* and sigma_r = sigma_r(M*).
CertificateReport pl_dual_bound(const Matrix& x, const Matrix& z, double mu_prime,
                                double c_tilde, double sigma_r);

/// Pieces of the error decomposition XX^T - ZZ^T = XY^T + YX^T - P_perp ZZ^T P_perp.
struct ErrorSplit {
  Matrix proj;       ///< projector onto range(X)
  Matrix proj_perp;  ///< I - proj
  Matrix r;          ///< r x r with proj Z = X r
  Matrix z_perp;     ///< proj_perp Z
  Matrix y_hat;      ///< X/2 - X r r^T/2 - proj_perp Z r^T
};
ErrorSplit error_split(const Matrix& x, const Matrix& z);

/// eta_0(X) from the alpha/beta closed form; checks eta_0 <= 1/3 + 1e-8.
CertificateReport saddle_eta0(const Matrix& x, const Matrix& z,
                              std::optional<double> kappa = std::nullopt,
                              std::optional<double> zeta = std::nullopt);

/// The objective (2 beta g + 1 - psi(g))/(1 + psi(g)) that eta_0 minimizes over g in [0, 1].
double eta0_objective(double alpha, double beta, double gamma);

/// sigma_r(ZZ^T) ||X - Z||_F^2 against ||XX^T - ZZ^T||_F^2 / (2(sqrt 2 - 1)).
/// Throws std::invalid_argument unless X^T Z is symmetric positive semidefinite.
CertificateReport normcompare_report(const Matrix& x, const Matrix& z);
bool normcompare_check(const Matrix& x, const Matrix& z);

/// Outcome of a randomized certificate suite.
struct SuiteSummary {
  std::string name;
  int instances = 0;
  int passed = 0;
  int construction_gaps = 0;
  double worst_margin = 0.0;  ///< smallest rhs - lhs of the suite's main check
  double worst_value = 0.0;   ///< suite-specific: max eta0, max objective, ...
  std::uint64_t worst_instance = 0;

  bool ok() const { return passed == instances; }
};

SuiteSummary gradhessian_suite(int count, std::uint64_t seed);
SuiteSummary saddle_suite(int count, std::uint64_t seed);
SuiteSummary pl_dual_suite(int count, std::uint64_t seed);
SuiteSummary normcompare_suite(int count, std::uint64_t seed);

}  // namespace lowrank
