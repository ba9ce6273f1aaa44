#include "lowrank/rip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lowrank {

namespace {

const double kSqrt2m1 = std::sqrt(2.0) - 1.0;

void check_delta(double delta, bool closed, const char* what) {
  const bool ok = closed ? (delta >= 0.0 && delta <= 1.0) : (delta >= 0.0 && delta < 1.0);
  if (!ok)
    throw std::invalid_argument(std::string(what) + ": delta must lie in " +
                                (closed ? "[0, 1]" : "[0, 1)"));
}

void check_sigma(double sigma_r, const char* what) {
  if (!(sigma_r > 0.0) || !std::isfinite(sigma_r))
    throw std::invalid_argument(std::string(what) + ": sigma_r must be positive");
}

}  // namespace

RipEstimate estimate_rip(const LinearOperator& op, int r, int samples, std::uint64_t seed,
                         Symmetry symmetry) {
  if (samples < 1) throw std::invalid_argument("estimate_rip: samples must be >= 1");
  if (r < 1) throw std::invalid_argument("estimate_rip: r must be >= 1");
  if (symmetry == Symmetry::symmetric && op.rows() != op.cols())
    throw DimensionError("estimate_rip: symmetric sampling needs a square operator");
  const Eigen::Index k = 2 * r;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int i = 0; i < samples; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Matrix m;
    if (symmetry == Symmetry::symmetric) {
      const Matrix x = rng.normal_matrix(op.rows(), k);
      m = x * x.transpose();
    } else {
      const Matrix u = rng.normal_matrix(op.rows(), k);
      const Matrix v = rng.normal_matrix(op.cols(), k);
      m = u * v.transpose();
    }
    const double s = op.apply_unscaled(m).squaredNorm() / m.squaredNorm();
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (!(hi > 0.0)) throw std::runtime_error("estimate_rip: operator vanishes on every sample");
  RipEstimate out;
  out.scale = std::sqrt(2.0 / (lo + hi));
  out.delta = (hi - lo) / (hi + lo);
  out.s_min = lo;
  out.s_max = hi;
  out.samples = samples;
  out.seed = seed;
  out.symmetry = symmetry;
  return out;
}

RipEstimate symmetric_rip_exact(const LinearOperator& op) {
  if (op.rows() != op.cols())
    throw DimensionError("symmetric_rip_exact: operator must act on square matrices");
  const Eigen::Index n = op.rows();
  Matrix basis = Matrix::Zero(n * n, n * (n + 1) / 2);
  Eigen::Index k = 0;
  const double h = 1.0 / std::sqrt(2.0);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i, ++k) {
      if (i == j) {
        basis(i + j * n, k) = 1.0;
      } else {
        basis(i + j * n, k) = h;
        basis(j + i * n, k) = h;
      }
    }
  const Matrix db = op.design() * basis;
  Eigen::SelfAdjointEigenSolver<Matrix> es(db.transpose() * db, Eigen::EigenvaluesOnly);
  const double lo = std::max(es.eigenvalues()(0), 0.0);
  const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
  if (!(hi > 0.0)) throw std::runtime_error("symmetric_rip_exact: operator vanishes");
  RipEstimate out;
  out.scale = std::sqrt(2.0 / (lo + hi));
  out.delta = (hi - lo) / (hi + lo);
  out.s_min = lo;
  out.s_max = hi;
  out.samples = 0;
  return out;
}

double rip_delta_for(double a2, double s_min, double s_max) {
  return std::max(1.0 - a2 * s_min, a2 * s_max - 1.0);
}

double pl_radius_sym(double delta, double sigma_r) {
  check_delta(delta, false, "pl_radius_sym");
  check_sigma(sigma_r, "pl_radius_sym");
  return std::sqrt(2.0 * kSqrt2m1) * std::sqrt(1.0 - delta * delta) * std::sqrt(sigma_r);
}

double pl_radius_asym(double delta, double sigma_r) {
  check_delta(delta, false, "pl_radius_asym");
  check_sigma(sigma_r, "pl_radius_asym");
  return 2.0 * std::sqrt(kSqrt2m1) * std::sqrt(1.0 + 2.0 * delta - 3.0 * delta * delta) /
         (1.0 + delta) * std::sqrt(sigma_r);
}

double local_region_sym(double delta, double sigma_r) {
  check_delta(delta, true, "local_region_sym");
  check_sigma(sigma_r, "local_region_sym");
  return 2.0 * kSqrt2m1 * (1.0 - delta) * sigma_r;
}

double local_region_asym(double delta, double sigma_r) {
  check_delta(delta, true, "local_region_asym");
  check_sigma(sigma_r, "local_region_asym");
  return 4.0 * kSqrt2m1 * (1.0 - delta) / (1.0 + delta) * sigma_r;
}

double max_step_sym(double rho1, int r, double delta, double dist0, double bound_d) {
  check_delta(delta, false, "max_step_sym");
  if (!(rho1 > 0.0) || r < 1 || dist0 < 0.0 || bound_d < 0.0)
    throw std::invalid_argument("max_step_sym: invalid arguments");
  const double inv = 12.0 * rho1 * std::sqrt(static_cast<double>(r)) *
                     (std::sqrt((1.0 + delta) / (1.0 - delta)) * dist0 + bound_d);
  if (!(inv > 0.0)) throw std::invalid_argument("max_step_sym: dist0 and D are both zero");
  return 1.0 / inv;
}

double max_step_asym(double rho1, int r, double delta, double dist0, double bound_d) {
  check_delta(delta, false, "max_step_asym");
  if (!(rho1 > 0.0) || r < 1 || dist0 < 0.0 || bound_d < 0.0)
    throw std::invalid_argument("max_step_asym: invalid arguments");
  const double inv = 12.0 * rho1 * std::sqrt(static_cast<double>(r)) *
                     (std::sqrt((1.0 + 3.0 * delta) / (1.0 - delta)) * dist0 + 2.0 * bound_d);
  if (!(inv > 0.0)) throw std::invalid_argument("max_step_asym: dist0 and D are both zero");
  return 1.0 / inv;
}

PriorRadii prior_radii(double delta, double sigma_r, double sigma_1) {
  check_delta(delta, true, "prior_radii");
  check_sigma(sigma_r, "prior_radii");
  if (sigma_1 < sigma_r) throw std::invalid_argument("prior_radii: sigma_1 < sigma_r");
  const double root = std::sqrt(sigma_r);
  PriorRadii p;
  p.convex_sym = 0.01 * (1.0 - delta) / (1.0 + delta) * (sigma_r / sigma_1) * root;
  p.linear_sym_6r = 0.25 * root;
  p.linear_asym_6r = 0.25 * root;
  p.convex_asym = std::sqrt(2.0) / 10.0 * std::sqrt((1.0 - delta) / (1.0 + delta)) * root;
  p.general_asym_2r4r = root;
  return p;
}

}  // namespace lowrank
