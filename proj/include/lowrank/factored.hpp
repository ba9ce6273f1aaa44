#pragma once

#include <memory>

#include "lowrank/losses.hpp"

namespace lowrank {

/// Default bound on n*r for dense Hessian assembly of the factored objective.
inline constexpr Eigen::Index kDenseHessianLimit = 4000;

/// g(X) = f(X X^T)
double g_value(const MatrixLoss& loss, const Matrix& x);

/// grad g(X) = (grad f + grad f^T)(X X^T) X, which is 2 grad f(X X^T) X
/// whenever the loss gradient is symmetric.
Matrix g_grad(const MatrixLoss& loss, const Matrix& x);

/// [Hess g(X)](U, U) = [Hess f(XX^T)](XU^T + UX^T, XU^T + UX^T) + 2 <grad f(XX^T), UU^T>
double g_hess_form(const MatrixLoss& loss, const Matrix& x, const Matrix& u);

/// Symmetric bilinear form behind g_hess_form.
double g_hess_bilinear(const MatrixLoss& loss, const Matrix& x, const Matrix& u,
                       const Matrix& v);

/// The nr x nr matrix G with vec(U)^T G vec(V) = [Hess g(X)](U, V).
Matrix g_hessian_matrix(const MatrixLoss& loss, const Matrix& x,
                        Eigen::Index dense_limit = kDenseHessianLimit);

/// Smallest eigenvalue of g_hessian_matrix. Throws std::length_error when
/// n*r exceeds dense_limit; no iterative fallback is provided.
double g_hess_min_eig(const MatrixLoss& loss, const Matrix& x,
                      Eigen::Index dense_limit = kDenseHessianLimit);

/// Column j of the n^2 x nr operator with X_op vec(U) = vec(XU^T + UX^T).
Matrix x_operator_direction(const Matrix& x, Eigen::Index j);

/// Symmetric lift of an asymmetric loss f_a on n x m matrices:
///
///   F(N) = (f_a(N12) + f_a(N21^T)) / 2
///          + phi/4 (||N11||^2 + ||N22||^2 - ||N12||^2 - ||N21||^2)
///
/// on (n+m) x (n+m) block matrices.
class LiftedLoss final : public MatrixLoss {
 public:
  LiftedLoss(std::shared_ptr<const MatrixLoss> inner, double phi);

  std::string kind() const override { return "lifted"; }
  Eigen::Index rows() const override { return n_ + m_; }
  Eigen::Index cols() const override { return n_ + m_; }

  double value(const Matrix& big) const override;
  Matrix gradient(const Matrix& big) const override;
  double hess_form(const Matrix& big, const Matrix& k, const Matrix& l) const override;
  Matrix hess_apply(const Matrix& big, const Matrix& k) const override;

  const MatrixLoss& inner() const noexcept { return *inner_; }
  std::shared_ptr<const MatrixLoss> inner_ptr() const noexcept { return inner_; }
  double phi() const noexcept { return phi_; }
  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index m() const noexcept { return m_; }

 private:
  std::shared_ptr<const MatrixLoss> inner_;
  double phi_;
  Eigen::Index n_;
  Eigen::Index m_;
};

/// Throws std::invalid_argument when phi <= 0 and DimensionError when f_a is
/// not n x m.
std::shared_ptr<const LiftedLoss> lift_asymmetric(std::shared_ptr<const MatrixLoss> f_a,
                                                  Eigen::Index n, Eigen::Index m, double phi);

/// Regularization weight that minimizes the RIP constant of the lift.
inline double default_phi(double delta) { return (1.0 - delta) / 2.0; }

struct BalancedFactors {
  Matrix u;          ///< n x r, U^T U = Sigma
  Matrix v;          ///< m x r, V^T V = Sigma
  Matrix augmented;  ///< [U; V][U; V]^T
};

/// Balanced factorization from the compact SVD M* = P S Q^T: U = P S^{1/2},
/// V = Q S^{1/2}. Throws std::invalid_argument if rank(M*) != r.
BalancedFactors balance_and_augment(const Matrix& m_star, int r);

/// [U; V][U; V]^T for an arbitrary factor pair.
Matrix augment(const Matrix& u, const Matrix& v);

/// RIP constant of the scaled lift 4F/(1+delta) given the constant of f_a.
inline double lifted_delta(double delta) { return 2.0 * delta / (1.0 + delta); }

/// Lifted recovery problem for an asymmetric loss: the loss is the lift with
/// phi = (1 - delta)/2, the ground truth is the augmented M~*, and delta and
/// D are translated to 2 delta/(1 + delta) and 2D.
RecoveryProblem make_lifted_problem(std::shared_ptr<const MatrixLoss> f_a, const Matrix& m_star,
                                    int r, double delta, double rho1, double rho2,
                                    double bound_d);

}  // namespace lowrank
