#include "lowrank/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lowrank {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

Eigen::Map<const Vector> as_vec(const Matrix& m) { return {m.data(), m.size()}; }

}  // namespace

// ---------------------------------------------------------------------------
// LinearOperator

LinearOperator::LinearOperator(const std::vector<Matrix>& sensing, double scale,
                               std::optional<std::uint64_t> seed)
    : rows_(0), cols_(0), scale_(scale), seed_(seed) {
  if (sensing.empty()) throw std::invalid_argument("LinearOperator: need at least one matrix");
  rows_ = sensing.front().rows();
  cols_ = sensing.front().cols();
  design_.resize(static_cast<Eigen::Index>(sensing.size()), rows_ * cols_);
  for (std::size_t i = 0; i < sensing.size(); ++i) {
    const Matrix& a = sensing[i];
    if (a.rows() != rows_ || a.cols() != cols_)
      throw DimensionError("LinearOperator: sensing matrix " + std::to_string(i) + " is " +
                           shape_str(a.rows(), a.cols()) + ", expected " +
                           shape_str(rows_, cols_));
    design_.row(static_cast<Eigen::Index>(i)) = as_vec(a).transpose();
  }
  if (!(scale_ > 0.0)) throw std::invalid_argument("LinearOperator: scale must be positive");
}

LinearOperator::LinearOperator(Eigen::Index rows, Eigen::Index cols, Matrix design,
                               double scale, std::optional<std::uint64_t> seed)
    : rows_(rows), cols_(cols), design_(std::move(design)), scale_(scale), seed_(seed) {
  if (rows_ < 1 || cols_ < 1 || design_.rows() < 1)
    throw std::invalid_argument("LinearOperator: empty operator");
  if (design_.cols() != rows_ * cols_)
    throw DimensionError("LinearOperator: design matrix has " + std::to_string(design_.cols()) +
                         " columns, expected " + std::to_string(rows_ * cols_));
  if (!(scale_ > 0.0)) throw std::invalid_argument("LinearOperator: scale must be positive");
}

LinearOperator LinearOperator::with_scale(double scale) const {
  return LinearOperator(rows_, cols_, design_, scale, seed_);
}

Matrix LinearOperator::sensing_matrix(Eigen::Index i) const {
  const Vector row = design_.row(i).transpose();
  return Eigen::Map<const Matrix>(row.data(), rows_, cols_);
}

Vector LinearOperator::apply_unscaled(const Matrix& m) const {
  if (m.rows() != rows_ || m.cols() != cols_)
    throw DimensionError("LinearOperator: argument is " + shape_str(m.rows(), m.cols()) +
                         ", expected " + shape_str(rows_, cols_));
  return design_ * as_vec(m);
}

Vector LinearOperator::apply(const Matrix& m) const { return scale_ * apply_unscaled(m); }

Matrix LinearOperator::adjoint(const Vector& v) const {
  if (v.size() != count())
    throw DimensionError("LinearOperator: adjoint argument has length " +
                         std::to_string(v.size()) + ", expected " + std::to_string(count()));
  const Vector out = scale_ * (design_.transpose() * v);
  return Eigen::Map<const Matrix>(out.data(), rows_, cols_);
}

// ---------------------------------------------------------------------------
// MatrixLoss

void MatrixLoss::check_shape(const Matrix& m, const char* what) const {
  if (m.rows() != rows() || m.cols() != cols())
    throw DimensionError(kind() + " loss: " + what + " is " + shape_str(m.rows(), m.cols()) +
                         ", expected " + shape_str(rows(), cols()));
}

Matrix MatrixLoss::hessian_matrix(const Matrix& m) const {
  check_shape(m, "M");
  const Eigen::Index dim = rows() * cols();
  Matrix h(dim, dim);
  Matrix e = Matrix::Zero(rows(), cols());
  for (Eigen::Index k = 0; k < dim; ++k) {
    e.data()[k] = 1.0;
    const Matrix col = hess_apply(m, e);
    h.col(k) = as_vec(col);
    e.data()[k] = 0.0;
  }
  return sym_part(h);
}

// ---------------------------------------------------------------------------
// LinearLoss

LinearLoss::LinearLoss(LinearOperator op, Vector d) : op_(std::move(op)), d_(std::move(d)) {
  if (d_.size() != op_.count())
    throw DimensionError("linear loss: measurement vector has length " +
                         std::to_string(d_.size()) + ", expected " +
                         std::to_string(op_.count()));
}

std::shared_ptr<const LinearLoss> LinearLoss::from_ground_truth(LinearOperator op,
                                                                 const Matrix& m_star) {
  Vector d = op.apply(m_star);
  return std::make_shared<const LinearLoss>(std::move(op), std::move(d));
}

double LinearLoss::value(const Matrix& m) const {
  check_shape(m, "M");
  return 0.5 * (op_.apply(m) - d_).squaredNorm();
}

Matrix LinearLoss::gradient(const Matrix& m) const {
  check_shape(m, "M");
  return op_.adjoint(op_.apply(m) - d_);
}

double LinearLoss::hess_form(const Matrix& m, const Matrix& k, const Matrix& l) const {
  check_shape(m, "M");
  check_shape(k, "K");
  check_shape(l, "L");
  return op_.apply(k).dot(op_.apply(l));
}

Matrix LinearLoss::hess_apply(const Matrix& m, const Matrix& k) const {
  check_shape(m, "M");
  check_shape(k, "K");
  return op_.adjoint(op_.apply(k));
}

Matrix LinearLoss::hessian_matrix(const Matrix& m) const {
  check_shape(m, "M");
  const double a2 = op_.scale() * op_.scale();
  Matrix h = a2 * (op_.design().transpose() * op_.design());
  return sym_part(h);
}

// ---------------------------------------------------------------------------
// OneBitLoss

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_prime(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

OneBitLoss::OneBitLoss(Matrix y, double scale) : y_(std::move(y)), scale_(scale) {
  if (y_.rows() != y_.cols())
    throw DimensionError("onebit loss: frequency matrix must be square");
  if (y_.size() == 0) throw DimensionError("onebit loss: empty frequency matrix");
  if ((y_.array() < 0.0).any() || (y_.array() > 1.0).any())
    throw std::invalid_argument("onebit loss: frequencies must lie in [0, 1]");
  if (!(scale_ > 0.0)) throw std::invalid_argument("onebit loss: scale must be positive");
}

double OneBitLoss::value(const Matrix& m) const {
  check_shape(m, "M");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    acc += softplus(m.data()[i]) - y_.data()[i] * m.data()[i];
  return scale_ * acc;
}

Matrix OneBitLoss::gradient(const Matrix& m) const {
  check_shape(m, "M");
  Matrix g(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i)
    g.data()[i] = scale_ * (sigmoid(m.data()[i]) - y_.data()[i]);
  return g;
}

double OneBitLoss::hess_form(const Matrix& m, const Matrix& k, const Matrix& l) const {
  check_shape(m, "M");
  check_shape(k, "K");
  check_shape(l, "L");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    acc += sigmoid_prime(m.data()[i]) * k.data()[i] * l.data()[i];
  return scale_ * acc;
}

Matrix OneBitLoss::hess_apply(const Matrix& m, const Matrix& k) const {
  check_shape(m, "M");
  check_shape(k, "K");
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i)
    out.data()[i] = scale_ * sigmoid_prime(m.data()[i]) * k.data()[i];
  return out;
}

Matrix OneBitLoss::hessian_matrix(const Matrix& m) const {
  check_shape(m, "M");
  Vector diag(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) diag(i) = scale_ * sigmoid_prime(m.data()[i]);
  return diag.asDiagonal();
}

// ---------------------------------------------------------------------------
// Factories

LinearOperator make_gaussian_operator(Eigen::Index n, Eigen::Index m, Eigen::Index p,
                                      std::uint64_t seed) {
  if (n < 1 || m < 1 || p < 1)
    throw std::invalid_argument("make_gaussian_operator: n, m, p must be >= 1");
  Rng rng(seed);
  std::vector<Matrix> sensing;
  sensing.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) sensing.push_back(rng.normal_matrix(n, m));
  return LinearOperator(sensing, 1.0, seed);
}

LinearOperator make_identity_operator(Eigen::Index n, Eigen::Index m) {
  if (n < 1 || m < 1) throw std::invalid_argument("make_identity_operator: n, m must be >= 1");
  return LinearOperator(n, m, Matrix::Identity(n * m, n * m));
}

std::shared_ptr<const OneBitLoss> make_onebit_loss(const Matrix& m_hat, double scale) {
  if (m_hat.rows() != m_hat.cols())
    throw DimensionError("make_onebit_loss: ground truth must be square");
  Matrix y = m_hat.unaryExpr([](double v) { return sigmoid(v); });
  return std::make_shared<const OneBitLoss>(std::move(y), scale);
}

double estimate_rho1(const MatrixLoss& loss, int r, double delta, int samples,
                     std::uint64_t seed) {
  if (r < 1 || samples < 1) throw std::invalid_argument("estimate_rho1: need r, samples >= 1");
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Matrix a = rng.normal_matrix(loss.rows(), r) * rng.normal_matrix(r, loss.cols());
    const Matrix b = rng.normal_matrix(loss.rows(), r) * rng.normal_matrix(r, loss.cols());
    const double den = (a - b).norm();
    if (den == 0.0) continue;
    worst = std::max(worst, (loss.gradient(a) - loss.gradient(b)).norm() / den);
  }
  return std::max(1.5 * worst, 1.0 + 2.0 * delta);
}

double onebit_rho1(double scale, double delta) { return std::max(scale / 4.0, 1.0 + 2.0 * delta); }

double onebit_rho2(double scale) { return scale / (6.0 * std::sqrt(3.0)); }

// ---------------------------------------------------------------------------
// RecoveryProblem

void require_rank(const Matrix& m, int r, const char* what) {
  if (r < 1) throw std::invalid_argument(std::string(what) + ": rank must be >= 1");
  const Vector s = singular_values(m);
  const double sr = r <= s.size() ? s(r - 1) : 0.0;
  const double next = r < s.size() ? s(r) : 0.0;
  if (!(sr > kRankTolerance) || !(next < kRankTolerance)) {
    std::ostringstream os;
    os << what << ": expected rank " << r << " (sigma_r = " << sr << ", sigma_{r+1} = " << next
       << ")";
    throw std::invalid_argument(os.str());
  }
}

RecoveryProblem::RecoveryProblem(std::shared_ptr<const MatrixLoss> loss, Matrix m_star, int r,
                                 double delta, double rho1, double rho2, double bound_d)
    : loss_(std::move(loss)),
      m_star_(std::move(m_star)),
      r_(r),
      delta_(delta),
      rho1_(rho1),
      rho2_(rho2),
      bound_d_(bound_d),
      sigma_r_(0.0) {
  if (!loss_) throw std::invalid_argument("RecoveryProblem: null loss");
  loss_->check_shape(m_star_, "M*");
  if (!(delta_ >= 0.0 && delta_ < 1.0))
    throw std::invalid_argument("RecoveryProblem: delta must lie in [0, 1)");
  require_rank(m_star_, r_, "RecoveryProblem");
  sigma_r_ = sigma(m_star_, r_);
  if (rho1_ < 1.0 + 2.0 * delta_)
    throw std::invalid_argument("RecoveryProblem: rho1 must be at least 1 + 2 delta");
  if (rho2_ < 0.0) throw std::invalid_argument("RecoveryProblem: rho2 must be nonnegative");
  if (m_star_.norm() > bound_d_)
    throw std::invalid_argument("RecoveryProblem: ||M*||_F exceeds the bound D");
}

}  // namespace lowrank
