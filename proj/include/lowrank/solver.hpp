#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lowrank/losses.hpp"

namespace lowrank {

/// Derived constants of perturbed gradient descent with local improvement.
struct PgdParams {
  double c = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;

  double R = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double eps_hat = 0.0;
  double Delta = 0.0;
  double chi = 0.0;
  double eta = 0.0;
  double w = 0.0;
  double g_thres = 0.0;
  double f_thres = 0.0;
  double t_thres = 0.0;
  /// ceil(t_thres): the loop counter is an integer, so the window test
  /// t - t_noise = t_thres is evaluated against this value.
  long window = 0;
};

inline constexpr double kDefaultC = 0.5;
inline constexpr double kDefaultGamma = 0.1;
inline constexpr long kDefaultWindow = 100;

PgdParams pgd_params(const RecoveryProblem& problem, double c, double kappa, double gamma);

/// kappa for which t_thres equals `window` iterations (up to rounding).
double default_kappa(const RecoveryProblem& problem, double c, double gamma,
                     long window = kDefaultWindow);

struct TraceRow {
  long t = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double dist = 0.0;  ///< ||X_t X_t^T - M*||_F
  bool in_region = false;
  bool perturbed = false;
  int phase = 1;
};

/// Per-run counts of violated runtime invariants (only filled when checking
/// is enabled).
struct InvariantReport {
  bool checked = false;
  long descent_steps = 0;
  long descent_violations = 0;
  double descent_worst = 0.0;  ///< max of g(X') - g(X) + eta ||grad||^2/2, scaled
  long confinement_violations = 0;
  double confinement_worst = 0.0;  ///< max dist/R over phase 1
  long levelset_violations = 0;
  double levelset_worst = 0.0;  ///< max dist/(sqrt((1+d)/(1-d)) dist_0) where g <= g(X0)
};

struct Trace {
  std::vector<TraceRow> rows;
  Matrix x_final;
  double region_radius = 0.0;
  /// First t in phase 2, or -1 if phase 2 was never entered.
  long phase2_start = -1;
  long perturbations = 0;
  bool converged = false;
  /// Set when the iteration budget ran out, in either phase.
  bool budget_exhausted = false;
  /// Set when the budget ran out before phase 1 ended; the trace is partial.
  bool phase1_incomplete = false;
  std::string stop_reason;
  InvariantReport invariants;

  long iterations() const { return rows.empty() ? 0 : static_cast<long>(rows.size()) - 1; }
  /// First t whose row has in_region set, or -1.
  long region_entry() const;
  /// Number of phase-2 gradient steps taken.
  long phase2_iterations() const;
};

struct GdOptions {
  double eta = 0.0;
  long max_iters = 100000;
  double grad_tol = 0.0;  ///< stop when ||grad g||_F <= grad_tol
  double dist_tol = 0.0;  ///< stop when ||XX^T - M*||_F <= dist_tol
  bool check_invariants = false;
};

/// X_{t+1} = X_t - eta grad g(X_t), one trace row per iterate.
Trace gradient_descent(const RecoveryProblem& problem, const Matrix& x0, const GdOptions& opts);

struct PgdOptions {
  double eps_target = 1e-8;  ///< phase-2 stop on ||XX^T - M*||_F
  double grad_tol = 0.0;     ///< optional phase-2 stop on the gradient norm
  long max_iters = 100000;
  std::uint64_t seed = 0;
  bool check_invariants = false;
};

/// Perturbed gradient descent with local improvement. Phase 1 perturbs from
/// the uniform Frobenius ball of radius w whenever the gradient is small and
/// no perturbation happened within the last window, and reverts and switches
/// to phase 2 when a window ends without sufficient decrease. Phase 2 is plain
/// gradient descent until eps_target (or grad_tol) is met.
Trace perturbed_gd(const RecoveryProblem& problem, const Matrix& x0, const PgdParams& params,
                   const PgdOptions& opts);

/// Uniform sample from the Frobenius ball of the given radius in R^{rows x cols}.
Matrix uniform_ball(Rng& rng, Eigen::Index rows, Eigen::Index cols, double radius);

/// ||grad g(X)||_F <= kappa and lambda_min(Hess g(X)) >= -kappa.
bool check_second_order(const RecoveryProblem& problem, const Matrix& x, double kappa);

inline constexpr const char* kTraceHeader = "t,f,grad_norm,dist,in_region,perturbed,phase";

void write_trace_csv(const Trace& trace, std::ostream& os);
void write_trace_csv(const Trace& trace, const std::string& path);
/// Reads rows written by write_trace_csv; x_final and run metadata are not stored.
Trace read_trace_csv(std::istream& is);
Trace read_trace_csv(const std::string& path);

/// Least-squares fit y = a + b x; returns {slope, intercept, r2}.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Fit of log10(dist) against t over rows [first, end).
LineFit fit_log_dist(const Trace& trace, long first);

}  // namespace lowrank
