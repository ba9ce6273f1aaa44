#include "lowrank/factored.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lowrank {

namespace {

void check_factor(const MatrixLoss& loss, const Matrix& x) {
  if (loss.rows() != loss.cols())
    throw DimensionError("factored objective needs a square loss, got " + loss.kind() +
                         " on " + std::to_string(loss.rows()) + "x" +
                         std::to_string(loss.cols()));
  if (x.rows() != loss.rows() || x.cols() < 1)
    throw DimensionError("factor has " + std::to_string(x.rows()) + " rows, loss expects " +
                         std::to_string(loss.rows()));
}

void check_direction(const Matrix& x, const Matrix& u) {
  if (u.rows() != x.rows() || u.cols() != x.cols())
    throw DimensionError("direction shape differs from the factor");
}

Matrix lift_direction(const Matrix& x, const Matrix& u) {
  Matrix n = x * u.transpose();
  return n + n.transpose().eval();
}

}  // namespace

double g_value(const MatrixLoss& loss, const Matrix& x) {
  check_factor(loss, x);
  return loss.value(x * x.transpose());
}

Matrix g_grad(const MatrixLoss& loss, const Matrix& x) {
  check_factor(loss, x);
  const Matrix g = loss.gradient(x * x.transpose());
  return (g + g.transpose()) * x;
}

double g_hess_bilinear(const MatrixLoss& loss, const Matrix& x, const Matrix& u,
                       const Matrix& v) {
  check_factor(loss, x);
  check_direction(x, u);
  check_direction(x, v);
  const Matrix m = x * x.transpose();
  const Matrix uv = u * v.transpose();
  return loss.hess_form(m, lift_direction(x, u), lift_direction(x, v)) +
         frob_inner(loss.gradient(m), uv + uv.transpose());
}

double g_hess_form(const MatrixLoss& loss, const Matrix& x, const Matrix& u) {
  check_factor(loss, x);
  check_direction(x, u);
  const Matrix m = x * x.transpose();
  const Matrix n = lift_direction(x, u);
  return loss.hess_form(m, n, n) + 2.0 * frob_inner(loss.gradient(m), u * u.transpose());
}

Matrix x_operator_direction(const Matrix& x, Eigen::Index j) {
  const Eigen::Index n = x.rows();
  const Eigen::Index row = j % n;
  const Eigen::Index col = j / n;
  // X E^T has X(:, col) in column `row`; E X^T is its transpose.
  Matrix out = Matrix::Zero(n, n);
  out.col(row) += x.col(col);
  out.row(row) += x.col(col).transpose();
  return out;
}

Matrix g_hessian_matrix(const MatrixLoss& loss, const Matrix& x, Eigen::Index dense_limit) {
  check_factor(loss, x);
  const Eigen::Index n = x.rows();
  const Eigen::Index dim = x.size();
  if (dim > dense_limit)
    throw std::length_error("g_hessian_matrix: n*r = " + std::to_string(dim) +
                            " exceeds the dense limit " + std::to_string(dense_limit) +
                            "; use an iterative (Lanczos) eigensolver instead");
  const Matrix m = x * x.transpose();
  const Matrix s = sym_part(loss.gradient(m));

  // Columns of the lifted directions and their Hessian images, in vec form.
  Matrix dirs(n * n, dim);
  Matrix images(n * n, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const Matrix d = x_operator_direction(x, j);
    const Matrix hd = loss.hess_apply(m, d);
    dirs.col(j) = Eigen::Map<const Vector>(d.data(), d.size());
    images.col(j) = Eigen::Map<const Vector>(hd.data(), hd.size());
  }
  Matrix g = dirs.transpose() * images;
  const Eigen::Index r = x.cols();
  for (Eigen::Index b = 0; b < r; ++b) g.block(b * n, b * n, n, n) += 2.0 * s;
  return sym_part(g);
}

double g_hess_min_eig(const MatrixLoss& loss, const Matrix& x, Eigen::Index dense_limit) {
  const Matrix g = g_hessian_matrix(loss, x, dense_limit);
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// ---------------------------------------------------------------------------
// LiftedLoss

LiftedLoss::LiftedLoss(std::shared_ptr<const MatrixLoss> inner, double phi)
    : inner_(std::move(inner)), phi_(phi), n_(0), m_(0) {
  if (!inner_) throw std::invalid_argument("LiftedLoss: null inner loss");
  if (!(phi_ > 0.0)) throw std::invalid_argument("LiftedLoss: phi must be positive");
  n_ = inner_->rows();
  m_ = inner_->cols();
}

double LiftedLoss::value(const Matrix& big) const {
  check_shape(big, "N");
  const auto n11 = big.topLeftCorner(n_, n_);
  const auto n12 = big.topRightCorner(n_, m_);
  const auto n21 = big.bottomLeftCorner(m_, n_);
  const auto n22 = big.bottomRightCorner(m_, m_);
  const double data = 0.5 * (inner_->value(n12) + inner_->value(n21.transpose()));
  const double reg = 0.25 * phi_ *
                     (n11.squaredNorm() + n22.squaredNorm() - n12.squaredNorm() -
                      n21.squaredNorm());
  return data + reg;
}

Matrix LiftedLoss::gradient(const Matrix& big) const {
  check_shape(big, "N");
  Matrix g = 0.5 * phi_ * big;
  g.topRightCorner(n_, m_) *= -1.0;
  g.bottomLeftCorner(m_, n_) *= -1.0;
  g.topRightCorner(n_, m_) += 0.5 * inner_->gradient(big.topRightCorner(n_, m_));
  g.bottomLeftCorner(m_, n_) +=
      0.5 * inner_->gradient(big.bottomLeftCorner(m_, n_).transpose()).transpose();
  return g;
}

double LiftedLoss::hess_form(const Matrix& big, const Matrix& k, const Matrix& l) const {
  check_shape(big, "N");
  check_shape(k, "K");
  check_shape(l, "L");
  const Matrix n12 = big.topRightCorner(n_, m_);
  const Matrix n21t = big.bottomLeftCorner(m_, n_).transpose();
  const double data =
      0.5 * (inner_->hess_form(n12, k.topRightCorner(n_, m_), l.topRightCorner(n_, m_)) +
             inner_->hess_form(n21t, k.bottomLeftCorner(m_, n_).transpose(),
                               l.bottomLeftCorner(m_, n_).transpose()));
  const double reg =
      0.5 * phi_ *
      (frob_inner(k.topLeftCorner(n_, n_), l.topLeftCorner(n_, n_)) +
       frob_inner(k.bottomRightCorner(m_, m_), l.bottomRightCorner(m_, m_)) -
       frob_inner(k.topRightCorner(n_, m_), l.topRightCorner(n_, m_)) -
       frob_inner(k.bottomLeftCorner(m_, n_), l.bottomLeftCorner(m_, n_)));
  return data + reg;
}

Matrix LiftedLoss::hess_apply(const Matrix& big, const Matrix& k) const {
  check_shape(big, "N");
  check_shape(k, "K");
  Matrix out = 0.5 * phi_ * k;
  out.topRightCorner(n_, m_) *= -1.0;
  out.bottomLeftCorner(m_, n_) *= -1.0;
  out.topRightCorner(n_, m_) +=
      0.5 * inner_->hess_apply(big.topRightCorner(n_, m_), k.topRightCorner(n_, m_));
  out.bottomLeftCorner(m_, n_) +=
      0.5 * inner_
                ->hess_apply(big.bottomLeftCorner(m_, n_).transpose(),
                             k.bottomLeftCorner(m_, n_).transpose())
                .transpose();
  return out;
}

std::shared_ptr<const LiftedLoss> lift_asymmetric(std::shared_ptr<const MatrixLoss> f_a,
                                                  Eigen::Index n, Eigen::Index m, double phi) {
  if (!f_a) throw std::invalid_argument("lift_asymmetric: null loss");
  if (f_a->rows() != n || f_a->cols() != m)
    throw DimensionError("lift_asymmetric: loss is not defined on " + std::to_string(n) + "x" +
                         std::to_string(m) + " matrices");
  if (!(phi > 0.0)) throw std::invalid_argument("lift_asymmetric: phi must be positive");
  return std::make_shared<const LiftedLoss>(std::move(f_a), phi);
}

// ---------------------------------------------------------------------------
// Augmented ground truth

Matrix augment(const Matrix& u, const Matrix& v) {
  if (u.cols() != v.cols()) throw DimensionError("augment: factor column counts differ");
  Matrix stacked(u.rows() + v.rows(), u.cols());
  stacked << u, v;
  return stacked * stacked.transpose();
}

BalancedFactors balance_and_augment(const Matrix& m_star, int r) {
  require_rank(m_star, r, "balance_and_augment");
  Eigen::JacobiSVD<Matrix> svd(m_star, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector root = svd.singularValues().head(r).cwiseSqrt();
  BalancedFactors out;
  out.u = svd.matrixU().leftCols(r) * root.asDiagonal();
  out.v = svd.matrixV().leftCols(r) * root.asDiagonal();
  out.augmented = augment(out.u, out.v);
  return out;
}

RecoveryProblem make_lifted_problem(std::shared_ptr<const MatrixLoss> f_a, const Matrix& m_star,
                                    int r, double delta, double rho1, double rho2,
                                    double bound_d) {
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("make_lifted_problem: delta must lie in [0, 1)");
  const Eigen::Index n = m_star.rows();
  const Eigen::Index m = m_star.cols();
  auto lifted = lift_asymmetric(std::move(f_a), n, m, default_phi(delta));
  BalancedFactors bf = balance_and_augment(m_star, r);
  const double dl = lifted_delta(delta);
  // The lift keeps the restricted Lipschitz constants of f_a; the floor only
  // reflects the larger RIP constant of the scaled lift.
  return RecoveryProblem(std::move(lifted), std::move(bf.augmented), r, dl,
                         std::max(rho1, 1.0 + 2.0 * dl), rho2, 2.0 * bound_d);
}

}  // namespace lowrank
