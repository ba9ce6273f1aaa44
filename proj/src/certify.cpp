#include "lowrank/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lowrank/factored.hpp"
#include "lowrank/rip.hpp"

namespace lowrank {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kSqrt2m1 = std::sqrt(2.0) - 1.0;

void check_square_pair(const Matrix& x, const Matrix& z, const char* what) {
  if (x.rows() != z.rows() || x.cols() != z.cols())
    throw DimensionError(std::string(what) + ": X and Z shapes differ");
  if (x.size() == 0) throw DimensionError(std::string(what) + ": empty factor");
}

double min_eig(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Vectorization

Vector vec(const Matrix& a) { return Eigen::Map<const Vector>(a.data(), a.size()); }

Matrix sym_mat(const Vector& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size()) throw DimensionError("sym_mat: length is not a perfect square");
  return sym_part(Eigen::Map<const Matrix>(v.data(), n, n));
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix x_operator(const Matrix& x, Eigen::Index dense_limit) {
  const Eigen::Index n = x.rows();
  if (n * n > dense_limit)
    throw std::length_error("x_operator: n^2 = " + std::to_string(n * n) +
                            " exceeds the dense limit " + std::to_string(dense_limit));
  Matrix op(n * n, x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) op.col(j) = vec(x_operator_direction(x, j));
  return op;
}

PsdSplit psd_split(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("psd_split: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym_part(m));
  const Vector& lam = es.eigenvalues();
  const double cut = 1e-12 * std::max(lam.cwiseAbs().maxCoeff(), 0.0);
  Vector pos = Vector::Zero(lam.size());
  Vector neg = Vector::Zero(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) > cut) pos(i) = lam(i);
    if (lam(i) < -cut) neg(i) = -lam(i);
  }
  const Matrix& v = es.eigenvectors();
  return {v * pos.asDiagonal() * v.transpose(), v * neg.asDiagonal() * v.transpose()};
}

// ---------------------------------------------------------------------------
// Mean-value Hessian

std::pair<Vector, Vector> gauss_legendre(int points) {
  if (points < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  const double pi = std::acos(-1.0);
  // P_points(x) and its derivative by the three-term recurrence.
  auto legendre = [points](double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= points; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair<double, double>{p1, points * (x * p1 - p0) / (x * x - 1.0)};
  };
  Vector nodes(points), weights(points);
  for (int i = 0; i < points; ++i) {
    double x = std::cos(pi * (i + 0.75) / (points + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(x);
      const double step = p / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    nodes(i) = 0.5 * (1.0 - x);
    weights(i) = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return {nodes, weights};
}

Matrix mean_hessian(const MatrixLoss& loss, const Matrix& x, const Matrix& m_star,
                    int quad_points, Eigen::Index dense_limit) {
  const Eigen::Index n = x.rows();
  if (loss.rows() != n || loss.cols() != n)
    throw DimensionError("mean_hessian: loss must act on n x n matrices");
  loss.check_shape(m_star, "M*");
  if (n * n > dense_limit)
    throw std::length_error("mean_hessian: n^2 = " + std::to_string(n * n) +
                            " exceeds the dense limit " + std::to_string(dense_limit));
  const Matrix xx = x * x.transpose();
  const auto [nodes, weights] = gauss_legendre(quad_points);
  Matrix h = Matrix::Zero(n * n, n * n);
  for (int k = 0; k < quad_points; ++k) {
    const double t = nodes(k);
    h += weights(k) * loss.hessian_matrix((1.0 - t) * xx + t * m_star);
  }
  return sym_part(h);
}

// ---------------------------------------------------------------------------
// Reports

CertificateReport::CertificateReport()
    : q1(kNaN),
      q2(kNaN),
      alpha(kNaN),
      beta(kNaN),
      eta0(kNaN),
      cos_theta(kNaN),
      objective(kNaN),
      bound(kNaN),
      slack(kNaN) {}

void CertificateReport::add(std::string name, double lhs, double rhs, double tol) {
  checks.push_back({std::move(name), lhs, rhs, lhs <= rhs + tol});
}

bool CertificateReport::pass() const {
  if (construction_gap) return false;
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

double CertificateReport::worst_margin() const {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& c : checks) worst = std::min(worst, c.rhs - c.lhs);
  return worst;
}

CertificateReport verify_gradhessian(const MatrixLoss& loss, const Matrix& x,
                                     const Matrix& m_star, double delta, int quad_points) {
  if (!(delta >= 0.0)) throw std::invalid_argument("verify_gradhessian: delta must be >= 0");
  CertificateReport rep;
  rep.kind = "gradhessian";
  const Eigen::Index n = x.rows();
  const Eigen::Index r = x.cols();
  const Matrix h = mean_hessian(loss, x, m_star, quad_points);
  const Vector e = vec(x * x.transpose() - m_star);
  const Matrix xop = x_operator(x);
  const Vector he = h * e;

  const double grad_norm = g_grad(loss, x).norm();
  const double lhs1 = (xop.transpose() * he).norm();
  rep.add("XtHe_le_grad", lhs1, grad_norm, 1e-10 * std::max(1.0, grad_norm));

  Matrix lmi = (1.0 + delta) * (xop.transpose() * xop);
  const Matrix s = sym_mat(he);
  for (Eigen::Index b = 0; b < r; ++b) lmi.block(b * n, b * n, n, n) += 2.0 * s;
  const double lam_lmi = min_eig(sym_part(lmi));
  const double lam_hess = g_hess_min_eig(loss, x);
  rep.add("lmi_ge_hess_min", lam_hess, lam_lmi, 1e-8);
  return rep;
}

// ---------------------------------------------------------------------------
// Alignment and the first-order certificate

Matrix align(const Matrix& x, const Matrix& z) {
  check_square_pair(x, z, "align");
  Eigen::JacobiSVD<Matrix> svd(x.transpose() * z, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix rot = svd.matrixV() * svd.matrixU().transpose();
  return z * rot;
}

CertificateReport pl_dual_bound(const Matrix& x, const Matrix& z, double mu_prime,
                                double c_tilde, double sigma_r) {
  check_square_pair(x, z, "pl_dual_bound");
  if (!(mu_prime >= 0.0)) throw std::invalid_argument("pl_dual_bound: mu' must be >= 0");
  if (!(sigma_r > 0.0)) throw std::invalid_argument("pl_dual_bound: sigma_r must be positive");
  if (!(c_tilde >= 0.0) || !(c_tilde * c_tilde < 2.0 * kSqrt2m1 * sigma_r))
    throw std::invalid_argument("pl_dual_bound: C~ must lie in [0, sqrt(2(sqrt2-1) sigma_r))");
  const Matrix za = align(x, z);
  const Matrix err = x * x.transpose() - za * za.transpose();
  const double err_norm = err.norm();
  if (!(err_norm > 1e-12 * std::max(1.0, (za * za.transpose()).norm())))
    throw std::invalid_argument("pl_dual_bound: XX^T equals ZZ^T");
  const double gap = (x - za).norm();
  if (gap > c_tilde * (1.0 + 1e-12))
    throw std::invalid_argument("pl_dual_bound: ||X - Z_aligned||_F exceeds C~");

  CertificateReport rep;
  rep.kind = "pl_dual";
  const Eigen::Index r = x.cols();
  const Vector e = vec(err);
  const Matrix xop = x_operator(x);
  const double sr_x = std::pow(sigma(x, static_cast<int>(r)), 2);

  auto admissible = [&](const Vector& y) {
    const Vector xy = xop * y;
    const bool norm_ok = xy.squaredNorm() >= 2.0 * sr_x * y.squaredNorm() * (1.0 - 1e-12);
    const bool resid_ok = (e - xy).norm() <= gap * gap * (1.0 + 1e-12) + 1e-15;
    return norm_ok && resid_ok && y.norm() > 0.0;
  };

  Vector y = xop.completeOrthogonalDecomposition().solve(e);
  rep.y_source = "least_squares";
  if (!admissible(y)) {
    y = vec(x - za);
    rep.y_source = "aligned_difference";
    if (!admissible(y)) {
      rep.construction_gap = true;
      return rep;
    }
  }
  const Vector xy = xop * y;
  const double xy_norm = xy.norm();
  rep.cos_theta = e.dot(xy) / (e.norm() * xy_norm);
  rep.objective =
      (1.0 - rep.cos_theta + 2.0 * mu_prime * y.norm() / xy_norm) / (1.0 + rep.cos_theta);
  rep.q1 = std::sqrt(1.0 - c_tilde * c_tilde / (2.0 * kSqrt2m1 * sigma_r));
  rep.q2 = std::sqrt(2.0) * mu_prime / (std::sqrt(sigma_r) - c_tilde);
  rep.bound = (1.0 - rep.q1 + rep.q2) / (1.0 + rep.q1);

  rep.add("objective_le_bound", rep.objective, rep.bound, 1e-8);
  rep.add("cos_theta_ge_q1", rep.q1, rep.cos_theta, 1e-10);
  rep.add("y_norm_bound", y.norm(), xy_norm / (std::sqrt(2.0) * (std::sqrt(sigma_r) - c_tilde)),
          1e-10 * xy_norm);

  const Matrix m = xy * e.transpose() + e * xy.transpose();
  const PsdSplit split = psd_split(m);
  const double scale = e.norm() * xy_norm;
  const double tp = split.plus.trace();
  const double tm = split.minus.trace();
  const double want_p = scale * (1.0 + rep.cos_theta);
  const double want_m = scale * (1.0 - rep.cos_theta);
  rep.add("trace_plus", std::abs(tp - want_p), 0.0, 1e-8 * scale);
  rep.add("trace_minus", std::abs(tm - want_m), 0.0, 1e-8 * scale);
  return rep;
}

// ---------------------------------------------------------------------------
// Second-order certificate

ErrorSplit error_split(const Matrix& x, const Matrix& z) {
  check_square_pair(x, z, "error_split");
  const Eigen::Index n = x.rows();
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > kRankTolerance) ++rank;
  const Matrix u = svd.matrixU().leftCols(rank);
  ErrorSplit out;
  out.proj = u * u.transpose();
  out.proj_perp = Matrix::Identity(n, n) - out.proj;
  out.r = x.completeOrthogonalDecomposition().solve(z);
  out.z_perp = out.proj_perp * z;
  out.y_hat = 0.5 * x - 0.5 * x * out.r * out.r.transpose() - out.z_perp * out.r.transpose();
  return out;
}

double eta0_objective(double alpha, double beta, double gamma) {
  const double psi = gamma * alpha + std::sqrt(1.0 - gamma * gamma) * std::sqrt(1.0 - alpha * alpha);
  return (2.0 * beta * gamma + 1.0 - psi) / (1.0 + psi);
}

CertificateReport saddle_eta0(const Matrix& x, const Matrix& z, std::optional<double> kappa,
                              std::optional<double> zeta) {
  check_square_pair(x, z, "saddle_eta0");
  const int r = static_cast<int>(x.cols());
  const double sr = sigma(x, r);
  if (!(sr > kRankTolerance)) throw std::invalid_argument("saddle_eta0: sigma_r(X) must be > 0");
  const Matrix za = align(x, z);
  const Matrix err = x * x.transpose() - za * za.transpose();
  const double err_norm = err.norm();
  if (!(err_norm > 1e-12 * std::max(1.0, (za * za.transpose()).norm())))
    throw std::invalid_argument("saddle_eta0: XX^T equals ZZ^T");

  CertificateReport rep;
  rep.kind = "saddle";
  const ErrorSplit sp = error_split(x, za);
  const Matrix zz_perp = sp.z_perp * sp.z_perp.transpose();
  const Matrix lifted = x * sp.y_hat.transpose() + sp.y_hat * x.transpose();
  const double tol = 1e-10 * std::max(1.0, err_norm);

  rep.add("split_identity", (lifted - zz_perp - err).norm(), 0.0, tol);
  rep.add("split_orthogonal", std::abs(frob_inner(lifted, zz_perp)), 0.0,
          tol * std::max(1.0, zz_perp.norm()));

  if (kappa && zeta) {
    if (!(*zeta > 0.0)) throw std::invalid_argument("saddle_eta0: zeta must be positive");
    rep.slack = (std::sqrt(static_cast<double>(r)) + std::sqrt(2.0) / *zeta) * *kappa / err_norm;
  }

  const double zz_norm = zz_perp.norm();
  if (!(sp.z_perp.norm() > kRankTolerance * std::max(1.0, za.norm()))) {
    rep.special_case = true;
    rep.eta0 = 0.0;
    rep.add("eta0_le_third", rep.eta0, 1.0 / 3.0, 1e-8);
    return rep;
  }
  rep.alpha = zz_norm / err_norm;
  rep.beta = sr * sr * zz_perp.trace() / (err_norm * zz_norm);
  const double root = std::sqrt(std::max(0.0, 1.0 - rep.alpha * rep.alpha));
  if (rep.beta >= rep.alpha / (1.0 + root))
    rep.eta0 = (1.0 - root) / (1.0 + root);
  else
    rep.eta0 = rep.beta * (rep.alpha - rep.beta) / (1.0 - rep.beta * rep.alpha);

  // e = ||e|| (sqrt(1 - alpha^2) u1 - alpha u2) with u1, u2 orthonormal.
  const Matrix polar = lifted / lifted.norm() * (root * err_norm) - zz_perp / zz_norm * (rep.alpha * err_norm);
  rep.add("error_polar", (polar - err).norm(), 0.0, tol);
  rep.add("eta0_le_third", rep.eta0, 1.0 / 3.0, 1e-8);
  return rep;
}

// ---------------------------------------------------------------------------
// Norm comparison

CertificateReport normcompare_report(const Matrix& x, const Matrix& z) {
  check_square_pair(x, z, "normcompare_check");
  const Matrix xtz = x.transpose() * z;
  const double scale = std::max(1.0, xtz.norm());
  if ((xtz - xtz.transpose()).norm() > 1e-10 * scale || min_eig(sym_part(xtz)) < -1e-10 * scale)
    throw std::invalid_argument("normcompare_check: X^T Z must be symmetric PSD; align Z first");
  CertificateReport rep;
  rep.kind = "normcompare";
  const Matrix zz = z * z.transpose();
  const double lhs = sigma(zz, static_cast<int>(z.cols())) * (x - z).squaredNorm();
  const double rhs = (x * x.transpose() - zz).squaredNorm() / (2.0 * kSqrt2m1);
  rep.add("normcompare", lhs, rhs, 1e-10);
  return rep;
}

bool normcompare_check(const Matrix& x, const Matrix& z) { return normcompare_report(x, z).pass(); }

// ---------------------------------------------------------------------------
// Randomized suites

namespace {

int pick(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

void record(SuiteSummary& sum, const CertificateReport& rep, const std::string& main,
            double value, std::uint64_t id) {
  ++sum.instances;
  if (rep.construction_gap) ++sum.construction_gaps;
  if (rep.pass()) ++sum.passed;
  for (const auto& c : rep.checks) {
    if (c.name != main) continue;
    const double margin = c.rhs - c.lhs;
    if (sum.instances == 1 || margin < sum.worst_margin) {
      sum.worst_margin = margin;
      sum.worst_instance = id;
    }
  }
  if (sum.instances == 1 || value > sum.worst_value) sum.worst_value = value;
}

}  // namespace

SuiteSummary gradhessian_suite(int count, std::uint64_t seed) {
  SuiteSummary sum;
  sum.name = "gradhessian";
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const int n = pick(rng, 2, 5);
    const int r = pick(rng, 1, std::min(2, n));
    const Eigen::Index p = n * (n + 1);
    const std::uint64_t op_seed = derive_seed(seed ^ 0x5a5a5a5aULL, static_cast<std::uint64_t>(i));
    const LinearOperator raw = make_gaussian_operator(n, n, p, op_seed);
    const RipEstimate rip = symmetric_rip_exact(raw);
    const Matrix z = rng.normal_matrix(n, r);
    const Matrix x = rng.normal_matrix(n, r);
    const Matrix m_star = z * z.transpose();
    auto loss = LinearLoss::from_ground_truth(raw.with_scale(rip.scale), m_star);
    CertificateReport rep = verify_gradhessian(*loss, x, m_star, rip.delta);
    rep.instance = static_cast<std::uint64_t>(i);
    record(sum, rep, "lmi_ge_hess_min", rep.checks.front().lhs / std::max(1e-300, rep.checks.front().rhs),
           rep.instance);
  }
  return sum;
}

SuiteSummary saddle_suite(int count, std::uint64_t seed) {
  SuiteSummary sum;
  sum.name = "saddle_eta0";
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const int n = pick(rng, 2, 6);
    const int r = pick(rng, 1, std::min(3, n));
    Matrix x = rng.normal_matrix(n, r);
    while (sigma(x, r) <= 1e-3) x = rng.normal_matrix(n, r);
    const Matrix z = rng.normal_matrix(n, r);
    CertificateReport rep = saddle_eta0(x, z);
    rep.instance = static_cast<std::uint64_t>(i);
    record(sum, rep, "eta0_le_third", rep.eta0, rep.instance);
  }
  return sum;
}

SuiteSummary pl_dual_suite(int count, std::uint64_t seed) {
  SuiteSummary sum;
  sum.name = "pl_dual_bound";
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const int n = pick(rng, 2, 6);
    const int r = pick(rng, 1, std::min(3, n));
    const Matrix z = rng.normal_matrix(n, r);
    const double sr = sigma(z * z.transpose(), r);
    const double delta = rng.uniform(0.0, 0.9);
    const double c_tilde = 0.5 * pl_radius_sym(delta, sr);
    const Matrix dir = rng.normal_matrix(n, r);
    const double len = c_tilde * (0.05 + 0.95 * rng.uniform());
    const Matrix x = z + dir * (len / dir.norm());
    const double mu_prime = rng.uniform() * (std::sqrt(sr) - c_tilde);
    CertificateReport rep = pl_dual_bound(x, z, mu_prime, c_tilde, sr);
    rep.instance = static_cast<std::uint64_t>(i);
    record(sum, rep, "objective_le_bound", rep.objective, rep.instance);
  }
  return sum;
}

SuiteSummary normcompare_suite(int count, std::uint64_t seed) {
  SuiteSummary sum;
  sum.name = "normcompare";
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const int n = pick(rng, 1, 6);
    const int r = pick(rng, 1, std::min(3, n));
    const Matrix x = rng.normal_matrix(n, r);
    const Matrix z = align(x, rng.normal_matrix(n, r));
    CertificateReport rep = normcompare_report(x, z);
    rep.instance = static_cast<std::uint64_t>(i);
    const auto& c = rep.checks.front();
    record(sum, rep, "normcompare", c.rhs > 0.0 ? c.lhs / c.rhs : 0.0, rep.instance);
  }
  return sum;
}

}  // namespace lowrank
