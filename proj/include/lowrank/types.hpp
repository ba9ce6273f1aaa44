#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lowrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when matrix shapes disagree with what a loss or operator expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterate or objective value stops being finite.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, long iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

inline double frob_inner(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).sum();
}

inline Matrix sym_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Singular values in descending order.
Vector singular_values(const Matrix& a);

/// i-th largest singular value, 1-based; returns 0 past the matrix rank.
double sigma(const Matrix& a, int i);

/// Deterministic generator. The engine output of mt19937_64 is fixed by the
/// standard, but the <random> distributions are not, so the uniform and
/// normal transforms are written out here to keep streams portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via the Marsaglia polar method.
  double normal();

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 mixing of (seed, stream) into an independent child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lowrank
