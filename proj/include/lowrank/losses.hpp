#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/types.hpp"

namespace lowrank {

/// p sensing matrices A_1..A_p of shape n x m, applied as a * A(M) with
/// A(M)_i = <A_i, M>. Stored as a p x (n*m) design matrix whose i-th row
/// is vec(A_i) in column-major order.
class LinearOperator {
 public:
  LinearOperator(const std::vector<Matrix>& sensing, double scale = 1.0,
                 std::optional<std::uint64_t> seed = std::nullopt);
  LinearOperator(Eigen::Index rows, Eigen::Index cols, Matrix design, double scale = 1.0,
                 std::optional<std::uint64_t> seed = std::nullopt);

  Eigen::Index rows() const noexcept { return rows_; }
  Eigen::Index cols() const noexcept { return cols_; }
  Eigen::Index count() const noexcept { return design_.rows(); }
  double scale() const noexcept { return scale_; }
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  /// Copy of this operator with a different scale factor.
  LinearOperator with_scale(double scale) const;

  /// Unscaled design matrix, p x (n*m).
  const Matrix& design() const noexcept { return design_; }
  Matrix sensing_matrix(Eigen::Index i) const;

  /// a * A(M)
  Vector apply(const Matrix& m) const;
  /// a * A^*(v), an n x m matrix.
  Matrix adjoint(const Vector& v) const;
  /// A(M) without the scale factor.
  Vector apply_unscaled(const Matrix& m) const;

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  Matrix design_;
  double scale_;
  std::optional<std::uint64_t> seed_;
};

/// A twice differentiable function on rows() x cols() matrices.
///
/// Implementations are immutable after construction, so every member is safe
/// to call concurrently.
class MatrixLoss {
 public:
  virtual ~MatrixLoss() = default;

  virtual std::string kind() const = 0;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;

  virtual double value(const Matrix& m) const = 0;
  virtual Matrix gradient(const Matrix& m) const = 0;
  /// [Hess f(M)](K, L)
  virtual double hess_form(const Matrix& m, const Matrix& k, const Matrix& l) const = 0;
  /// The matrix H(K) with <H(K), L> = [Hess f(M)](K, L).
  virtual Matrix hess_apply(const Matrix& m, const Matrix& k) const = 0;
  /// Dense (rows*cols) x (rows*cols) Hessian in column-major vec coordinates.
  virtual Matrix hessian_matrix(const Matrix& m) const;

  void check_shape(const Matrix& m, const char* what) const;
};

/// f(M) = 1/2 || a A(M) - d ||^2
class LinearLoss final : public MatrixLoss {
 public:
  LinearLoss(LinearOperator op, Vector d);
  /// Noiseless measurements d = a A(M*).
  static std::shared_ptr<const LinearLoss> from_ground_truth(LinearOperator op,
                                                              const Matrix& m_star);

  std::string kind() const override { return "linear"; }
  Eigen::Index rows() const override { return op_.rows(); }
  Eigen::Index cols() const override { return op_.cols(); }

  double value(const Matrix& m) const override;
  Matrix gradient(const Matrix& m) const override;
  double hess_form(const Matrix& m, const Matrix& k, const Matrix& l) const override;
  Matrix hess_apply(const Matrix& m, const Matrix& k) const override;
  Matrix hessian_matrix(const Matrix& m) const override;

  const LinearOperator& op() const noexcept { return op_; }
  const Vector& measurements() const noexcept { return d_; }

 private:
  LinearOperator op_;
  Vector d_;
};

/// Negative log-likelihood of 1-bit observations with a logistic link,
/// f(M) = s * sum_ij (log(1 + e^{M_ij}) - y_ij M_ij).
class OneBitLoss final : public MatrixLoss {
 public:
  OneBitLoss(Matrix y, double scale);

  std::string kind() const override { return "onebit"; }
  Eigen::Index rows() const override { return y_.rows(); }
  Eigen::Index cols() const override { return y_.cols(); }

  double value(const Matrix& m) const override;
  Matrix gradient(const Matrix& m) const override;
  double hess_form(const Matrix& m, const Matrix& k, const Matrix& l) const override;
  Matrix hess_apply(const Matrix& m, const Matrix& k) const override;
  Matrix hessian_matrix(const Matrix& m) const override;

  const Matrix& frequencies() const noexcept { return y_; }
  double scale() const noexcept { return scale_; }

 private:
  Matrix y_;
  double scale_;
};

double sigmoid(double x);
/// log(1 + e^x) without overflow.
double softplus(double x);
/// sigma'(x) = sigma(x) (1 - sigma(x))
double sigmoid_prime(double x);

/// Scale for 1-bit losses that maps 6 sigma' over |M_ij| <= 2.29 onto (1/2, 3/2].
inline constexpr double kOneBitDefaultScale = 6.0;
/// Entry bound of the region on which the scaled 1-bit loss is well conditioned.
inline constexpr double kOneBitRegion = 2.29;

/// p matrices of i.i.d. standard normals, deterministic in seed, scale 1.
LinearOperator make_gaussian_operator(Eigen::Index n, Eigen::Index m, Eigen::Index p,
                                      std::uint64_t seed);
/// Entrywise basis: p = n*m and A(M) = vec(M).
LinearOperator make_identity_operator(Eigen::Index n, Eigen::Index m);

/// 1-bit loss in the full-measurement limit, y_ij = sigma(M_hat_ij).
std::shared_ptr<const OneBitLoss> make_onebit_loss(const Matrix& m_hat,
                                                   double scale = kOneBitDefaultScale);

/// Restricted Lipschitz constant of grad f, estimated as 1.5 times the largest
/// ||grad f(M) - grad f(M')||_F / ||M - M'||_F over random rank-r pairs and
/// floored at 1 + 2 delta.
double estimate_rho1(const MatrixLoss& loss, int r, double delta, int samples = 200,
                     std::uint64_t seed = 0);
/// Exact constants for the 1-bit loss: rho1 = max(s/4, 1 + 2 delta), rho2 = s/(6 sqrt 3).
double onebit_rho1(double scale, double delta);
double onebit_rho2(double scale);

/// Numerical rank tolerance on singular values.
inline constexpr double kRankTolerance = 1e-10;

/// A loss together with its ground truth and the smoothness/RIP constants the
/// step-size and radius formulas depend on.
class RecoveryProblem {
 public:
  /// Throws std::invalid_argument unless rank(M*) = r, rho1 >= 1 + 2 delta,
  /// ||M*||_F <= D and delta is in [0, 1).
  RecoveryProblem(std::shared_ptr<const MatrixLoss> loss, Matrix m_star, int r, double delta,
                  double rho1, double rho2, double bound_d);

  const MatrixLoss& loss() const noexcept { return *loss_; }
  std::shared_ptr<const MatrixLoss> loss_ptr() const noexcept { return loss_; }
  const Matrix& m_star() const noexcept { return m_star_; }
  Eigen::Index n() const noexcept { return m_star_.rows(); }
  Eigen::Index m() const noexcept { return m_star_.cols(); }
  int r() const noexcept { return r_; }
  double delta() const noexcept { return delta_; }
  double rho1() const noexcept { return rho1_; }
  double rho2() const noexcept { return rho2_; }
  double bound_d() const noexcept { return bound_d_; }
  /// sigma_r(M*)
  double sigma_r() const noexcept { return sigma_r_; }

 private:
  std::shared_ptr<const MatrixLoss> loss_;
  Matrix m_star_;
  int r_;
  double delta_;
  double rho1_;
  double rho2_;
  double bound_d_;
  double sigma_r_;
};

/// Throws std::invalid_argument unless sigma_r(M) > tol >= sigma_{r+1}(M).
void require_rank(const Matrix& m, int r, const char* what);

}  // namespace lowrank
