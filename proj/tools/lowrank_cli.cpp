// Command-line driver: run, rip-estimate, certify, plot-data.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lowrank/certify.hpp"
#include "lowrank/experiment.hpp"
#include "lowrank/rip.hpp"

using namespace lowrank;

namespace {

Json suite_json(const SuiteSummary& s) {
  return Json{{"name", s.name},
              {"instances", s.instances},
              {"passed", s.passed},
              {"construction_gaps", s.construction_gaps},
              {"worst_margin", s.worst_margin},
              {"worst_value", s.worst_value},
              {"worst_instance", s.worst_instance},
              {"ok", s.ok()}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank matrix recovery by factored gradient methods"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment from a key-value config file");
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::string out_override;
  std::optional<double> eps_override;
  std::vector<std::string> sets;
  run->add_option("config", config_path, "Config file (key = value lines)")->required();
  run->add_option("--seed", seed_override, "Override the seed");
  run->add_option("--out", out_override, "Override the output directory");
  run->add_option("--eps", eps_override, "Override eps_target");
  run->add_option("--set", sets, "Extra key=value assignments");

  // rip-estimate
  auto* rip = app.add_subcommand("rip-estimate", "Estimate the RIP constant of a Gaussian operator");
  int rn = 40, rm = 0, rr = 1, rp = 120, rsamples = kDefaultRipSamples;
  std::uint64_t rseed = 0, op_seed = 1;
  bool asym = false;
  rip->add_option("--n", rn, "Rows")->capture_default_str();
  rip->add_option("--m", rm, "Columns (defaults to n)");
  rip->add_option("--r", rr, "Rank r (samples have rank 2r)")->capture_default_str();
  rip->add_option("--p", rp, "Number of measurements")->capture_default_str();
  rip->add_option("--samples", rsamples, "Random draws")->capture_default_str();
  rip->add_option("--seed", rseed, "Sampling seed")->capture_default_str();
  rip->add_option("--op-seed", op_seed, "Operator seed")->capture_default_str();
  rip->add_flag("--asym", asym, "Sample U V^T instead of X X^T");

  // certify
  auto* cert = app.add_subcommand("certify", "Run the randomized certificate suites");
  int n_grad = 100, n_saddle = 500, n_pl = 200, n_norm = 1000;
  std::uint64_t cseed = 0;
  cert->add_option("--gradhessian", n_grad, "Instances")->capture_default_str();
  cert->add_option("--saddle", n_saddle, "Instances")->capture_default_str();
  cert->add_option("--pl-dual", n_pl, "Instances")->capture_default_str();
  cert->add_option("--normcompare", n_norm, "Instances")->capture_default_str();
  cert->add_option("--seed", cseed, "Seed")->capture_default_str();

  // plot-data
  auto* plot = app.add_subcommand("plot-data", "Split a trace CSV into plot series");
  std::string trace_path, plot_out;
  plot->add_option("trace", trace_path, "trace.csv")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = parse_config_file(config_path);
      for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (seed_override) cfg.seed = *seed_override;
      if (!out_override.empty()) cfg.out = out_override;
      if (eps_override) cfg.eps_target = *eps_override;
      cfg.validate();
      const ExperimentResult res = run_experiment(cfg);
      std::cout << res.summary.dump(2) << '\n';
      return res.trace.converged ? 0 : 2;
    }
    if (*rip) {
      const int cols = rm > 0 ? rm : rn;
      const LinearOperator op = make_gaussian_operator(rn, cols, rp, op_seed);
      const RipEstimate est =
          estimate_rip(op, rr, rsamples, rseed, asym ? Symmetry::asymmetric : Symmetry::symmetric);
      const Json j{{"n", rn},           {"m", cols},          {"r", rr},
                   {"p", rp},           {"op_seed", op_seed}, {"seed", est.seed},
                   {"samples", est.samples}, {"symmetry", asym ? "asymmetric" : "symmetric"},
                   {"scale", est.scale}, {"delta", est.delta}, {"s_min", est.s_min},
                   {"s_max", est.s_max}};
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*cert) {
      const SuiteSummary suites[] = {gradhessian_suite(n_grad, cseed), saddle_suite(n_saddle, cseed),
                                     pl_dual_suite(n_pl, cseed), normcompare_suite(n_norm, cseed)};
      Json j{{"seed", cseed}, {"suites", Json::array()}};
      bool ok = true;
      for (const auto& s : suites) {
        j["suites"].push_back(suite_json(s));
        ok = ok && s.ok();
      }
      j["ok"] = ok;
      std::cout << j.dump(2) << '\n';
      return ok ? 0 : 2;
    }
    if (*plot) {
      const Trace tr = read_trace_csv(trace_path);
      emit_plot_data(tr, plot_out);
      std::cout << "marker " << tr.region_entry() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
