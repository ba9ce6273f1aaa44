#include "lowrank/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lowrank/factored.hpp"
#include "lowrank/rip.hpp"

namespace lowrank {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::sym_linear: return "sym-linear";
    case ExperimentKind::asym_linear: return "asym-linear";
    case ExperimentKind::onebit: return "onebit";
  }
  return "?";
}

ExperimentKind parse_kind(const std::string& s) {
  if (s == "sym-linear") return ExperimentKind::sym_linear;
  if (s == "asym-linear") return ExperimentKind::asym_linear;
  if (s == "onebit") return ExperimentKind::onebit;
  throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (!is || !is.eof()) throw std::invalid_argument("config: bad value for " + key + ": " + value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + value);
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "kind") cfg.kind = parse_kind(value);
  else if (key == "n") cfg.n = parse_number<int>(key, value);
  else if (key == "m") cfg.m = parse_number<int>(key, value);
  else if (key == "r") cfg.r = parse_number<int>(key, value);
  else if (key == "p") cfg.p = parse_number<int>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "method") {
    if (value == "pgd") cfg.method = SolverMethod::pgd;
    else if (value == "gd") cfg.method = SolverMethod::gd;
    else throw std::invalid_argument("config: method must be pgd or gd");
  }
  else if (key == "c") cfg.c = parse_number<double>(key, value);
  else if (key == "kappa") cfg.kappa = parse_number<double>(key, value);
  else if (key == "window") cfg.window = parse_number<long>(key, value);
  else if (key == "gamma") cfg.gamma = parse_number<double>(key, value);
  else if (key == "eps_target") cfg.eps_target = parse_number<double>(key, value);
  else if (key == "max_iters") cfg.max_iters = parse_number<long>(key, value);
  else if (key == "step_factor") cfg.step_factor = parse_number<double>(key, value);
  else if (key == "onebit_scale") cfg.onebit_scale = parse_number<double>(key, value);
  else if (key == "rip_samples") cfg.rip_samples = parse_number<int>(key, value);
  else if (key == "check_invariants") cfg.check_invariants = parse_bool(key, value);
  else if (key == "out") cfg.out = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  return parse_config(is);
}

void ExperimentConfig::validate() const {
  if (n < 1 || r < 1) throw std::invalid_argument("config: n and r must be >= 1");
  if (r > n) throw std::invalid_argument("config: r must not exceed n");
  if (kind == ExperimentKind::asym_linear) {
    if (m < 1) throw std::invalid_argument("config: asym-linear needs m >= 1");
    if (r > m) throw std::invalid_argument("config: r must not exceed m");
  }
  if (kind != ExperimentKind::onebit && p < 1)
    throw std::invalid_argument("config: linear kinds need p >= 1");
  if (!(eps_target > 0.0)) throw std::invalid_argument("config: eps_target must be positive");
  if (!(c > 0.0) || !(gamma > 0.0) || kappa < 0.0)
    throw std::invalid_argument("config: c, gamma must be positive and kappa nonnegative");
  if (window < 1) throw std::invalid_argument("config: window must be >= 1");
  if (max_iters < 0) throw std::invalid_argument("config: max_iters must be >= 0");
  if (!(step_factor > 0.0)) throw std::invalid_argument("config: step_factor must be positive");
  if (!(onebit_scale > 0.0)) throw std::invalid_argument("config: onebit_scale must be positive");
  if (rip_samples < 1) throw std::invalid_argument("config: rip_samples must be >= 1");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "kind = " << to_string(kind) << '\n'
     << "n = " << n << '\n'
     << "m = " << m << '\n'
     << "r = " << r << '\n'
     << "p = " << p << '\n'
     << "seed = " << seed << '\n'
     << "method = " << (method == SolverMethod::pgd ? "pgd" : "gd") << '\n'
     << "c = " << fmt17(c) << '\n'
     << "kappa = " << fmt17(kappa) << '\n'
     << "window = " << window << '\n'
     << "gamma = " << fmt17(gamma) << '\n'
     << "eps_target = " << fmt17(eps_target) << '\n'
     << "max_iters = " << max_iters << '\n'
     << "step_factor = " << fmt17(step_factor) << '\n'
     << "onebit_scale = " << fmt17(onebit_scale) << '\n'
     << "rip_samples = " << rip_samples << '\n'
     << "check_invariants = " << (check_invariants ? 1 : 0) << '\n';
  return os.str();
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Instances

namespace {

enum Stream : std::uint64_t {
  kOperatorStream = 1,
  kTruthStream,
  kInitStream,
  kRipStream,
  kRhoStream,
  kSolverStream,
};

/// Uniform[-1, 1] factor, rescaled so that max |X X^T| <= the 1-bit region.
Matrix onebit_factor(Rng& rng, int n, int r) {
  Matrix x = rng.uniform_matrix(n, r, -1.0, 1.0);
  const double peak = (x * x.transpose()).cwiseAbs().maxCoeff();
  if (peak > kOneBitRegion) x *= std::sqrt(kOneBitRegion / peak);
  return x;
}

}  // namespace

Instance build_instance(const ExperimentConfig& cfg) {
  cfg.validate();
  Instance inst;
  const std::uint64_t s = cfg.seed;
  Rng truth(derive_seed(s, kTruthStream));
  Rng init(derive_seed(s, kInitStream));

  switch (cfg.kind) {
    case ExperimentKind::sym_linear: {
      const Matrix z = truth.normal_matrix(cfg.n, cfg.r);
      const Matrix m_star = z * z.transpose();
      inst.x0 = init.normal_matrix(cfg.n, cfg.r);
      const LinearOperator raw =
          make_gaussian_operator(cfg.n, cfg.n, cfg.p, derive_seed(s, kOperatorStream));
      const RipEstimate rip =
          estimate_rip(raw, cfg.r, cfg.rip_samples, derive_seed(s, kRipStream), Symmetry::symmetric);
      auto loss = LinearLoss::from_ground_truth(raw.with_scale(rip.scale), m_star);
      const double rho1 = estimate_rho1(*loss, cfg.r, rip.delta, 200, derive_seed(s, kRhoStream));
      const double d = std::max(m_star.norm(), (inst.x0 * inst.x0.transpose()).norm());
      inst.problem.emplace(loss, m_star, cfg.r, rip.delta, rho1, 0.0, d);
      inst.m_star_original = m_star;
      inst.delta = rip.delta;
      inst.rip_scale = rip.scale;
      inst.sigma_r = inst.problem->sigma_r();
      inst.region_radius = local_region_sym(rip.delta, inst.sigma_r);
      inst.pl_radius = pl_radius_sym(rip.delta, inst.sigma_r);
      break;
    }
    case ExperimentKind::asym_linear: {
      const Matrix u = truth.normal_matrix(cfg.n, cfg.r);
      const Matrix v = truth.normal_matrix(cfg.m, cfg.r);
      const Matrix m_star = u * v.transpose();
      inst.x0 = init.normal_matrix(cfg.n + cfg.m, cfg.r);
      const LinearOperator raw =
          make_gaussian_operator(cfg.n, cfg.m, cfg.p, derive_seed(s, kOperatorStream));
      const RipEstimate rip = estimate_rip(raw, cfg.r, cfg.rip_samples,
                                           derive_seed(s, kRipStream), Symmetry::asymmetric);
      if (!(rip.delta < 1.0)) throw std::runtime_error("asym-linear: estimated delta is not < 1");
      auto f_a = LinearLoss::from_ground_truth(raw.with_scale(rip.scale), m_star);
      const double rho1 = estimate_rho1(*f_a, cfg.r, rip.delta, 200, derive_seed(s, kRhoStream));
      const double d_a =
          std::max(m_star.norm(), 0.5 * (inst.x0 * inst.x0.transpose()).norm());
      inst.problem.emplace(make_lifted_problem(f_a, m_star, cfg.r, rip.delta, rho1, 0.0, d_a));
      inst.m_star_original = m_star;
      inst.delta = rip.delta;
      inst.rip_scale = rip.scale;
      inst.sigma_r = sigma(m_star, cfg.r);
      inst.region_radius = local_region_asym(rip.delta, inst.sigma_r);
      inst.pl_radius = pl_radius_asym(rip.delta, inst.sigma_r);
      break;
    }
    case ExperimentKind::onebit: {
      const Matrix x_hat = onebit_factor(truth, cfg.n, cfg.r);
      const Matrix m_hat = x_hat * x_hat.transpose();
      inst.x0 = onebit_factor(init, cfg.n, cfg.r);
      auto loss = make_onebit_loss(m_hat, cfg.onebit_scale);
      // 6 sigma' maps the region onto (1/2, 3/2]; other scales are reported
      // with the constant of that same map.
      const double lo = cfg.onebit_scale * sigmoid_prime(kOneBitRegion);
      const double hi = cfg.onebit_scale * 0.25;
      const double delta = std::max(1.0 - lo, hi - 1.0);
      if (!(delta < 1.0)) throw std::runtime_error("onebit: scale gives delta >= 1");
      const double d = std::max(m_hat.norm(), (inst.x0 * inst.x0.transpose()).norm());
      inst.problem.emplace(loss, m_hat, cfg.r, delta, onebit_rho1(cfg.onebit_scale, delta),
                           onebit_rho2(cfg.onebit_scale), d);
      inst.m_star_original = m_hat;
      inst.delta = delta;
      inst.sigma_r = inst.problem->sigma_r();
      inst.region_radius = local_region_sym(delta, inst.sigma_r);
      inst.pl_radius = pl_radius_sym(delta, inst.sigma_r);
      break;
    }
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Running

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const Instance inst = build_instance(cfg);
  const RecoveryProblem& prob = *inst.problem;
  ExperimentResult res;

  if (cfg.method == SolverMethod::pgd) {
    const double kappa = cfg.kappa > 0.0 ? cfg.kappa : default_kappa(prob, cfg.c, cfg.gamma, cfg.window);
    res.params = pgd_params(prob, cfg.c, kappa, cfg.gamma);
    res.eta = res.params->eta;
    PgdOptions opts;
    opts.eps_target = cfg.eps_target;
    opts.max_iters = cfg.max_iters;
    opts.seed = derive_seed(cfg.seed, kSolverStream);
    opts.check_invariants = cfg.check_invariants;
    res.trace = perturbed_gd(prob, inst.x0, *res.params, opts);
  } else {
    const double dist0 = (inst.x0 * inst.x0.transpose() - prob.m_star()).norm();
    GdOptions opts;
    opts.eta = cfg.step_factor * max_step_sym(prob.rho1(), prob.r(), prob.delta(), dist0, prob.bound_d());
    opts.max_iters = cfg.max_iters;
    opts.dist_tol = cfg.eps_target;
    opts.check_invariants = cfg.check_invariants;
    res.eta = opts.eta;
    res.trace = gradient_descent(prob, inst.x0, opts);
  }

  const Trace& tr = res.trace;
  const PriorRadii prior =
      prior_radii(std::min(inst.delta, 1.0), inst.sigma_r, sigma(inst.m_star_original, 1));
  Json s;
  s["config_hash"] = cfg.hash();
  s["kind"] = to_string(cfg.kind);
  s["method"] = cfg.method == SolverMethod::pgd ? "pgd" : "gd";
  s["seed"] = cfg.seed;
  s["delta"] = inst.delta;
  s["rip_scale"] = inst.rip_scale;
  s["problem_delta"] = prob.delta();
  s["rho1"] = prob.rho1();
  s["rho2"] = prob.rho2();
  s["bound_d"] = prob.bound_d();
  s["sigma_r"] = inst.sigma_r;
  s["problem_sigma_r"] = prob.sigma_r();
  s["region_radius"] = inst.region_radius;
  s["pl_radius"] = inst.pl_radius;
  s["prior_radii"] = Json{{"convex_sym", prior.convex_sym},
                          {"linear_sym_6r", prior.linear_sym_6r},
                          {"linear_asym_6r", prior.linear_asym_6r},
                          {"convex_asym", prior.convex_asym},
                          {"general_asym_2r4r", prior.general_asym_2r4r}};
  s["eta"] = res.eta;
  if (res.params) {
    const PgdParams& p = *res.params;
    s["pgd"] = Json{{"c", p.c},         {"kappa", p.kappa},     {"gamma", p.gamma},
                    {"R", p.R},         {"l1", p.l1},           {"l2", p.l2},
                    {"eps_hat", p.eps_hat}, {"Delta", p.Delta}, {"chi", p.chi},
                    {"w", p.w},         {"g_thres", p.g_thres}, {"f_thres", p.f_thres},
                    {"t_thres", p.t_thres}, {"window", p.window}};
  }
  s["iterations"] = tr.iterations();
  s["phase2_start"] = tr.phase2_start;
  s["phase2_iterations"] = tr.phase2_iterations();
  s["perturbations"] = tr.perturbations;
  s["region_entry"] = tr.region_entry();
  s["initial_dist"] = tr.rows.front().dist;
  s["final_dist"] = tr.rows.back().dist;
  s["final_grad_norm"] = tr.rows.back().grad_norm;
  s["converged"] = tr.converged;
  s["budget_exhausted"] = tr.budget_exhausted;
  s["phase1_incomplete"] = tr.phase1_incomplete;
  s["stop_reason"] = tr.stop_reason;
  if (tr.invariants.checked) {
    const InvariantReport& iv = tr.invariants;
    s["invariants"] = Json{{"descent_steps", iv.descent_steps},
                           {"descent_violations", iv.descent_violations},
                           {"confinement_violations", iv.confinement_violations},
                           {"confinement_worst", iv.confinement_worst},
                           {"levelset_violations", iv.levelset_violations},
                           {"levelset_worst", iv.levelset_worst}};
  }
  res.summary = std::move(s);

  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    const fs::path dir(cfg.out);
    write_trace_csv(tr, (dir / "trace.csv").string());
    Trace marker;
    for (const auto& row : tr.rows)
      if (row.in_region) {
        marker.rows.push_back(row);
        break;
      }
    write_trace_csv(marker, (dir / "marker.csv").string());
    {
      std::ofstream os(dir / "summary.json", std::ios::binary);
      os << res.summary.dump(2) << '\n';
    }
    {
      std::ofstream os(dir / "config.txt", std::ios::binary);
      os << cfg.canonical();
    }
    emit_plot_data(tr, cfg.out);
  }
  return res;
}

void emit_plot_data(const Trace& trace, const std::string& dir) {
  if (trace.rows.empty()) throw std::invalid_argument("emit_plot_data: empty trace");
  fs::create_directories(dir);
  const fs::path base(dir);
  std::ofstream dist(base / "dist.csv", std::ios::binary);
  std::ofstream grad(base / "grad_norm.csv", std::ios::binary);
  if (!dist || !grad) throw std::runtime_error("emit_plot_data: cannot write into " + dir);
  dist << "t,dist\n";
  grad << "t,grad_norm\n";
  for (const auto& row : trace.rows) {
    dist << row.t << ',' << fmt17(row.dist) << '\n';
    grad << row.t << ',' << fmt17(row.grad_norm) << '\n';
  }
  std::ofstream marker(base / "marker.txt", std::ios::binary);
  marker << trace.region_entry() << '\n';
}

}  // namespace lowrank
