#include "lowrank/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "lowrank/factored.hpp"
#include "lowrank/rip.hpp"

namespace lowrank {

// ---------------------------------------------------------------------------
// Parameters

PgdParams pgd_params(const RecoveryProblem& problem, double c, double kappa, double gamma) {
  if (!(c > 0.0) || !(kappa > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("pgd_params: c, kappa and gamma must be positive");
  const double delta = problem.delta();
  const double d = problem.bound_d();
  const double rho1 = problem.rho1();
  const double rho2 = problem.rho2();
  const double r = static_cast<double>(problem.r());
  const double n = static_cast<double>(problem.n());

  PgdParams p;
  p.c = c;
  p.kappa = kappa;
  p.gamma = gamma;
  p.R = 3.0 * d * (1.0 + delta) / (1.0 - delta);
  p.l1 = 8.0 * rho1 * std::sqrt(r) * p.R;
  p.l2 = 4.0 * rho1 * std::pow(r, 0.25) * std::sqrt(p.R) *
         (2.0 * std::sqrt(r) * p.R * rho2 / rho1 + 3.0);
  p.eps_hat = std::min(kappa, kappa * kappa / p.l2);
  p.Delta = 2.0 * (1.0 + delta) * d * d;
  p.chi = 3.0 * std::max(std::log(n * r * p.l1 * p.Delta / (c * p.eps_hat * p.eps_hat * gamma)),
                         4.0);
  p.eta = c / p.l1;
  p.w = std::sqrt(c) * p.eps_hat / (p.chi * p.chi * p.l1);
  p.g_thres = std::sqrt(c) * p.eps_hat / (p.chi * p.chi);
  p.f_thres = c * std::sqrt(p.eps_hat * p.eps_hat * p.eps_hat / p.l2) / (p.chi * p.chi * p.chi);
  p.t_thres = p.chi * p.l1 / (c * c * std::sqrt(p.l2 * p.eps_hat));

  const double vals[] = {p.R,   p.l1,  p.l2,      p.eps_hat, p.Delta,  p.chi,
                         p.eta, p.w,   p.g_thres, p.f_thres, p.t_thres};
  for (double v : vals)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("pgd_params: a derived constant is not positive and finite");
  p.window = static_cast<long>(std::ceil(p.t_thres));
  return p;
}

double default_kappa(const RecoveryProblem& problem, double c, double gamma, long window) {
  if (window < 1) throw std::invalid_argument("default_kappa: window must be >= 1");
  // Solve t_thres(eps_hat) = window with chi depending on eps_hat.
  const PgdParams base = pgd_params(problem, c, 1.0, gamma);
  const double nr = static_cast<double>(problem.n()) * problem.r();
  double chi = 12.0;
  double eps_hat = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double root = chi * base.l1 / (c * c * static_cast<double>(window));
    eps_hat = root * root / base.l2;
    const double next = 3.0 * std::max(std::log(nr * base.l1 * base.Delta /
                                                (c * eps_hat * eps_hat * gamma)),
                                       4.0);
    if (std::abs(next - chi) <= 1e-14 * chi) break;
    chi = next;
  }
  return eps_hat >= base.l2 ? eps_hat : std::sqrt(eps_hat * base.l2);
}

// ---------------------------------------------------------------------------
// Trace helpers

long Trace::region_entry() const {
  for (const auto& row : rows)
    if (row.in_region) return row.t;
  return -1;
}

long Trace::phase2_iterations() const {
  if (phase2_start < 0 || rows.empty()) return 0;
  return rows.back().t - phase2_start;
}

namespace {

struct State {
  double f = 0.0;
  Matrix grad;
  double grad_norm = 0.0;
  double dist = 0.0;
};

State evaluate(const RecoveryProblem& problem, const Matrix& x, long t) {
  State s;
  const Matrix m = x * x.transpose();
  s.f = problem.loss().value(m);
  s.grad = g_grad(problem.loss(), x);
  s.grad_norm = s.grad.norm();
  s.dist = (m - problem.m_star()).norm();
  if (!std::isfinite(s.f) || !std::isfinite(s.grad_norm) || !std::isfinite(s.dist))
    throw NonFiniteError("non-finite objective or gradient", t);
  return s;
}

void check_start(const RecoveryProblem& problem, const Matrix& x0, const char* what) {
  if (x0.rows() != problem.n() || x0.cols() != problem.r())
    throw DimensionError(std::string(what) + ": X0 must be " + std::to_string(problem.n()) +
                         "x" + std::to_string(problem.r()));
  if (!x0.allFinite()) throw std::invalid_argument(std::string(what) + ": X0 is not finite");
}

class InvariantChecker {
 public:
  InvariantChecker(const RecoveryProblem& problem, const State& s0, double eta, double R,
                   bool enabled)
      : eta_(eta),
        R_(R),
        f0_(s0.f),
        level_(std::sqrt((1.0 + problem.delta()) / (1.0 - problem.delta())) * s0.dist),
        slack_(1e-12 * (1.0 + std::abs(s0.f))) {
    report_.checked = enabled;
  }

  void step(const State& before, const State& after) {
    if (!report_.checked) return;
    ++report_.descent_steps;
    const double excess =
        after.f - before.f + 0.5 * eta_ * before.grad_norm * before.grad_norm;
    report_.descent_worst = std::max(report_.descent_worst, excess);
    if (excess > slack_ + 1e-9 * std::abs(before.f)) ++report_.descent_violations;
  }

  void row(const TraceRow& row) {
    if (!report_.checked) return;
    if (row.phase == 1 && R_ > 0.0) {
      report_.confinement_worst = std::max(report_.confinement_worst, row.dist / R_);
      if (row.dist > R_) ++report_.confinement_violations;
    }
    if (row.f <= f0_) {
      if (level_ > 0.0) report_.levelset_worst = std::max(report_.levelset_worst, row.dist / level_);
      if (row.dist > level_ * (1.0 + 1e-6)) ++report_.levelset_violations;
    }
  }

  const InvariantReport& report() const { return report_; }

 private:
  double eta_;
  double R_;
  double f0_;
  double level_;
  double slack_;
  InvariantReport report_;
};

TraceRow make_row(long t, const State& s, double region, bool perturbed, int phase) {
  TraceRow row;
  row.t = t;
  row.f = s.f;
  row.grad_norm = s.grad_norm;
  row.dist = s.dist;
  row.in_region = s.dist < region;
  row.perturbed = perturbed;
  row.phase = phase;
  return row;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gradient descent

Trace gradient_descent(const RecoveryProblem& problem, const Matrix& x0, const GdOptions& opts) {
  check_start(problem, x0, "gradient_descent");
  if (!(opts.eta > 0.0)) throw std::invalid_argument("gradient_descent: eta must be positive");
  if (opts.max_iters < 0) throw std::invalid_argument("gradient_descent: max_iters < 0");

  Trace trace;
  trace.region_radius = local_region_sym(problem.delta(), problem.sigma_r());
  Matrix x = x0;
  State s = evaluate(problem, x, 0);
  InvariantChecker checker(problem, s, opts.eta, 0.0, opts.check_invariants);
  trace.rows.push_back(make_row(0, s, trace.region_radius, false, 2));
  trace.phase2_start = 0;
  checker.row(trace.rows.back());

  long t = 0;
  while (true) {
    if (s.grad_norm <= opts.grad_tol) {
      trace.converged = true;
      trace.stop_reason = "grad_tol";
      break;
    }
    if (opts.dist_tol > 0.0 && s.dist <= opts.dist_tol) {
      trace.converged = true;
      trace.stop_reason = "dist_tol";
      break;
    }
    if (t >= opts.max_iters) {
      trace.budget_exhausted = true;
      trace.stop_reason = "max_iters";
      break;
    }
    x -= opts.eta * s.grad;
    ++t;
    State next = evaluate(problem, x, t);
    checker.step(s, next);
    s = std::move(next);
    trace.rows.push_back(make_row(t, s, trace.region_radius, false, 2));
    checker.row(trace.rows.back());
  }
  trace.x_final = x;
  trace.invariants = checker.report();
  return trace;
}

// ---------------------------------------------------------------------------
// Perturbed gradient descent

Matrix uniform_ball(Rng& rng, Eigen::Index rows, Eigen::Index cols, double radius) {
  Matrix dir = rng.normal_matrix(rows, cols);
  double nrm = dir.norm();
  while (nrm == 0.0) {
    dir = rng.normal_matrix(rows, cols);
    nrm = dir.norm();
  }
  const double u = rng.uniform();
  const double scale = radius * std::pow(u, 1.0 / static_cast<double>(rows * cols));
  return dir * (scale / nrm);
}

Trace perturbed_gd(const RecoveryProblem& problem, const Matrix& x0, const PgdParams& params,
                   const PgdOptions& opts) {
  check_start(problem, x0, "perturbed_gd");
  if (!(opts.eps_target > 0.0))
    throw std::invalid_argument("perturbed_gd: eps_target must be positive");
  if (opts.max_iters < 0) throw std::invalid_argument("perturbed_gd: max_iters < 0");
  if (params.window < 1 || !(params.eta > 0.0))
    throw std::invalid_argument("perturbed_gd: parameters not initialized");
  const double x0_norm = (x0 * x0.transpose()).norm();
  if (x0_norm > problem.bound_d() * (1.0 + 1e-12))
    throw std::invalid_argument("perturbed_gd: ||X0 X0^T||_F exceeds D");

  Trace trace;
  trace.region_radius = local_region_sym(problem.delta(), problem.sigma_r());
  Rng rng(opts.seed);
  const long window = params.window;
  const double eta = params.eta;

  Matrix x = x0;
  Matrix x_saved;
  double f_saved = 0.0;
  long t = 0;
  long t_noise = -window - 1;
  State s = evaluate(problem, x, 0);
  InvariantChecker checker(problem, s, eta, params.R, opts.check_invariants);

  // Phase 1.
  bool switched = false;
  while (true) {
    bool perturbed = false;
    if (s.grad_norm <= params.g_thres && t - t_noise > window) {
      x_saved = x;
      f_saved = s.f;
      t_noise = t;
      x += uniform_ball(rng, x.rows(), x.cols(), params.w);
      s = evaluate(problem, x, t);
      perturbed = true;
      ++trace.perturbations;
    }
    if (t - t_noise == window && s.f - f_saved > -params.f_thres) {
      x = x_saved;
      s = evaluate(problem, x, t);
      switched = true;
    }
    trace.rows.push_back(make_row(t, s, trace.region_radius, perturbed, switched ? 2 : 1));
    checker.row(trace.rows.back());
    if (switched) break;
    if (t >= opts.max_iters) {
      trace.budget_exhausted = true;
      trace.phase1_incomplete = true;
      trace.stop_reason = "max_iters in phase 1";
      trace.x_final = x;
      trace.invariants = checker.report();
      return trace;
    }
    x -= eta * s.grad;
    ++t;
    State next = evaluate(problem, x, t);
    checker.step(s, next);
    s = std::move(next);
  }

  // Phase 2.
  trace.phase2_start = t;
  while (true) {
    if (s.dist <= opts.eps_target) {
      trace.converged = true;
      trace.stop_reason = "eps_target";
      break;
    }
    if (opts.grad_tol > 0.0 && s.grad_norm <= opts.grad_tol) {
      trace.converged = true;
      trace.stop_reason = "grad_tol";
      break;
    }
    if (t >= opts.max_iters) {
      trace.budget_exhausted = true;
      trace.stop_reason = "max_iters";
      break;
    }
    x -= eta * s.grad;
    ++t;
    State next = evaluate(problem, x, t);
    checker.step(s, next);
    s = std::move(next);
    trace.rows.push_back(make_row(t, s, trace.region_radius, false, 2));
    checker.row(trace.rows.back());
  }
  trace.x_final = x;
  trace.invariants = checker.report();
  return trace;
}

bool check_second_order(const RecoveryProblem& problem, const Matrix& x, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("check_second_order: kappa must be positive");
  if (g_grad(problem.loss(), x).norm() > kappa) return false;
  return g_hess_min_eig(problem.loss(), x) >= -kappa;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const Trace& trace, std::ostream& os) {
  os << kTraceHeader << '\n';
  for (const auto& row : trace.rows)
    os << row.t << ',' << fmt17(row.f) << ',' << fmt17(row.grad_norm) << ',' << fmt17(row.dist)
       << ',' << (row.in_region ? 1 : 0) << ',' << (row.perturbed ? 1 : 0) << ',' << row.phase
       << '\n';
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_trace_csv(trace, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader)
    throw std::runtime_error("trace csv: missing or unexpected header");
  Trace trace;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell[7];
    for (int k = 0; k < 7; ++k)
      if (!std::getline(ls, cell[k], ','))
        throw std::runtime_error("trace csv: short row at line " + std::to_string(lineno));
    TraceRow row;
    try {
      row.t = std::stol(cell[0]);
      row.f = std::stod(cell[1]);
      row.grad_norm = std::stod(cell[2]);
      row.dist = std::stod(cell[3]);
      row.in_region = std::stoi(cell[4]) != 0;
      row.perturbed = std::stoi(cell[5]) != 0;
      row.phase = std::stoi(cell[6]);
    } catch (const std::exception&) {
      throw std::runtime_error("trace csv: bad value at line " + std::to_string(lineno));
    }
    if (row.phase == 2 && trace.phase2_start < 0) trace.phase2_start = row.t;
    if (row.perturbed) ++trace.perturbations;
    trace.rows.push_back(row);
  }
  return trace;
}

Trace read_trace_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_trace_csv(is);
}

// ---------------------------------------------------------------------------
// Fits

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

LineFit fit_log_dist(const Trace& trace, long first) {
  std::vector<double> xs, ys;
  for (const auto& row : trace.rows) {
    if (row.t < first || !(row.dist > 0.0)) continue;
    xs.push_back(static_cast<double>(row.t));
    ys.push_back(std::log10(row.dist));
  }
  return fit_line(xs, ys);
}

}  // namespace lowrank
