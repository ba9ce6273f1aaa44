#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "lowrank/serialize.hpp"
#include "lowrank/solver.hpp"

namespace lowrank {

enum class ExperimentKind { sym_linear, asym_linear, onebit };
enum class SolverMethod { pgd, gd };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& s);

/// Experiment description. In the key-value file format every field below
/// is a line `key = value`; blank lines and `#` comments are ignored.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::sym_linear;
  int n = 40;
  int m = 0;  ///< asym-linear only
  int r = 1;
  int p = 120;  ///< linear kinds only
  std::uint64_t seed = 1;

  SolverMethod method = SolverMethod::pgd;
  double c = kDefaultC;
  double kappa = 0.0;  ///< 0 selects default_kappa
  long window = kDefaultWindow;
  double gamma = kDefaultGamma;
  double eps_target = 1e-8;
  long max_iters = 100000;
  double step_factor = 1.0;  ///< gd method: eta = step_factor * max_step_sym
  double onebit_scale = kOneBitDefaultScale;
  int rip_samples = 10000;
  bool check_invariants = false;

  std::string out;  ///< output directory; empty disables file output

  /// Throws std::invalid_argument on inconsistent or missing fields.
  void validate() const;
  /// Canonical `key = value` text (all fields but `out`), the hash input.
  std::string canonical() const;
  /// 64-bit FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_file(const std::string& path);
/// Applies one `key = value` assignment.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// A fully built recovery instance.
struct Instance {
  std::optional<RecoveryProblem> problem;
  Matrix x0;
  Matrix m_star_original;  ///< M* before any lift
  double delta = 0.0;      ///< RIP constant of the original loss
  double rip_scale = 1.0;  ///< a, linear kinds only
  double sigma_r = 0.0;    ///< sigma_r of the original M*
  double region_radius = 0.0;
  double pl_radius = 0.0;
};

Instance build_instance(const ExperimentConfig& cfg);

struct ExperimentResult {
  Trace trace;
  Json summary;
  double eta = 0.0;
  std::optional<PgdParams> params;
};

/// Builds the instance, runs the solver and, when cfg.out is set, writes
/// trace.csv, marker.csv, summary.json and the plot series into cfg.out.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes dist.csv (t,dist), grad_norm.csv (t,grad_norm) and marker.txt
/// (first in-region t, or -1) into dir.
void emit_plot_data(const Trace& trace, const std::string& dir);

}  // namespace lowrank
