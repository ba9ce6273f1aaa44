#pragma once

#include <cstdint>

#include "lowrank/losses.hpp"

namespace lowrank {

enum class Symmetry { symmetric, asymmetric };

/// Empirical RIP constant of a scaled linear operator.
struct RipEstimate {
  double scale = 1.0;  ///< a, with a^2 = 2/(s_min + s_max)
  double delta = 0.0;  ///< (s_max - s_min)/(s_max + s_min)
  double s_min = 0.0;
  double s_max = 0.0;
  int samples = 0;
  std::uint64_t seed = 0;
  Symmetry symmetry = Symmetry::symmetric;
};

inline constexpr int kDefaultRipSamples = 10000;

/// Samples s_i = ||A(M_i)||^2 / ||M_i||_F^2 on random rank-2r matrices, with
/// M_i = X X^T (X in R^{n x 2r}) in the symmetric case and M_i = U V^T in the
/// asymmetric case. The operator scale is ignored. Draw i uses its own
/// generator seeded with derive_seed(seed, i), so the result does not depend
/// on evaluation order and growing `samples` extends the sample set.
RipEstimate estimate_rip(const LinearOperator& op, int r, int samples = kDefaultRipSamples,
                         std::uint64_t seed = 0, Symmetry symmetry = Symmetry::symmetric);

/// Exact constant over the whole symmetric subspace: a^2 = 2/(l_min + l_max)
/// and delta = (l_max - l_min)/(l_max + l_min) for the extreme eigenvalues of
/// the unscaled Gram form restricted to symmetric matrices. This bounds the
/// rank-restricted constant from above. Requires a square operator.
RipEstimate symmetric_rip_exact(const LinearOperator& op);

/// The ratio a^2 s maps onto [1 - delta, 1 + delta] for given a^2.
double rip_delta_for(double a2, double s_min, double s_max);

double pl_radius_sym(double delta, double sigma_r);
double pl_radius_asym(double delta, double sigma_r);
double local_region_sym(double delta, double sigma_r);
double local_region_asym(double delta, double sigma_r);

/// Largest step size with
///   1/eta >= 12 rho1 sqrt(r) (sqrt((1+delta)/(1-delta)) dist0 + D).
double max_step_sym(double rho1, int r, double delta, double dist0, double bound_d);
/// Largest step size with
///   1/eta >= 12 rho1 sqrt(r) (sqrt((1+3 delta)/(1-delta)) dist0 + 2D).
double max_step_asym(double rho1, int r, double delta, double dist0, double bound_d);

/// Radii of prior local-convergence results, for comparison output.
struct PriorRadii {
  double convex_sym;          ///< (1/100)(1-d)/(1+d) (s_r/s_1) s_r^{1/2}
  double linear_sym_6r;       ///< 1/4 s_r^{1/2}
  double linear_asym_6r;      ///< 1/4 s_r^{1/2}
  double convex_asym;         ///< (sqrt 2/10) sqrt((1-d)/(1+d)) s_r^{1/2}
  double general_asym_2r4r;   ///< s_r^{1/2}
};

PriorRadii prior_radii(double delta, double sigma_r, double sigma_1);

}  // namespace lowrank
