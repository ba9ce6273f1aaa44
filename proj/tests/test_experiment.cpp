#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "lowrank/experiment.hpp"
#include "lowrank/rip.hpp"

using namespace lowrank;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path tmp_dir(const std::string& name) {
  const fs::path p = fs::path(LOWRANK_TEST_TMP) / name;
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_sym() {
  std::istringstream is(
      "kind = sym-linear\n"
      "n = 8\n"
      "r = 1\n"
      "p = 40\n"
      "seed = 3\n"
      "eps_target = 1e-6\n"
      "max_iters = 400000\n"
      "rip_samples = 2000\n");
  return parse_config(is);
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("comments, blanks and defaults") {
    std::istringstream is("# a comment\n\nkind = onebit\n  n = 6  \nr=2\nmethod = gd\n");
    const ExperimentConfig cfg = parse_config(is);
    CHECK(cfg.kind == ExperimentKind::onebit);
    CHECK(cfg.n == 6);
    CHECK(cfg.r == 2);
    CHECK(cfg.method == SolverMethod::gd);
    CHECK(cfg.c == kDefaultC);
    CHECK_NOTHROW(cfg.validate());
  }
  SUBCASE("errors") {
    std::istringstream unknown("colour = blue\n");
    CHECK_THROWS_AS(parse_config(unknown), std::invalid_argument);
    std::istringstream malformed("n 5\n");
    CHECK_THROWS_AS(parse_config(malformed), std::invalid_argument);
    std::istringstream bad_number("n = five\n");
    CHECK_THROWS_AS(parse_config(bad_number), std::invalid_argument);
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::asym_linear;
    cfg.m = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig{};
    cfg.r = cfg.n + 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig{};
    cfg.eps_target = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(parse_kind("linear"), std::invalid_argument);
    CHECK_THROWS(parse_config_file("/nonexistent/config"));
  }
  SUBCASE("shipped configs parse and validate") {
    for (const char* name : {"fig1a.conf", "fig1b.conf", "fig1c.conf"}) {
      CAPTURE(name);
      const ExperimentConfig cfg = parse_config_file(std::string(LOWRANK_CONFIG_DIR) + "/" + name);
      CHECK_NOTHROW(cfg.validate());
    }
  }
  SUBCASE("hash") {
    ExperimentConfig a;
    ExperimentConfig b;
    b.out = "/somewhere/else";
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.seed = 2;
    CHECK(a.hash() != b.hash());
    std::istringstream is(a.canonical());
    CHECK(parse_config(is).canonical() == a.canonical());
  }
}

TEST_CASE("instances") {
  SUBCASE("one-bit ground truth lies in the curvature region") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::onebit;
    cfg.n = 10;
    cfg.r = 5;
    const Instance inst = build_instance(cfg);
    CHECK(inst.m_star_original.cwiseAbs().maxCoeff() <= kOneBitRegion + 1e-12);
    CHECK(inst.delta == doctest::Approx(0.5));
    CHECK(inst.problem->r() == 5);
  }
  SUBCASE("asymmetric instance is lifted") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::asym_linear;
    cfg.n = 5;
    cfg.m = 4;
    cfg.r = 2;
    cfg.p = 60;
    cfg.rip_samples = 500;
    const Instance inst = build_instance(cfg);
    CHECK(inst.problem->n() == 9);
    CHECK(inst.m_star_original.rows() == 5);
    CHECK(inst.m_star_original.cols() == 4);
    CHECK(inst.problem->delta() == doctest::Approx(2 * inst.delta / (1 + inst.delta)));
    CHECK(inst.sigma_r == doctest::Approx(sigma(inst.m_star_original, 2)));
    CHECK(inst.problem->sigma_r() == doctest::Approx(2 * inst.sigma_r));
  }
  SUBCASE("symmetric marker radius") {
    const ExperimentConfig cfg = small_sym();
    const Instance inst = build_instance(cfg);
    CHECK(inst.region_radius == doctest::Approx(local_region_sym(inst.delta, inst.sigma_r)));
    CHECK(inst.pl_radius == doctest::Approx(pl_radius_sym(inst.delta, inst.sigma_r)));
  }
}

TEST_CASE("experiment runs are deterministic") {
  ExperimentConfig cfg = parse_config_file(std::string(LOWRANK_CONFIG_DIR) + "/fig1c.conf");
  const fs::path a = tmp_dir("det_a"), b = tmp_dir("det_b");
  cfg.out = a.string();
  const ExperimentResult ra = run_experiment(cfg);
  cfg.out = b.string();
  const ExperimentResult rb = run_experiment(cfg);
  CHECK(ra.trace.converged);
  CHECK(ra.trace.rows.back().dist <= 1e-6);
  for (const char* f : {"trace.csv", "marker.csv", "summary.json", "config.txt", "dist.csv",
                        "grad_norm.csv", "marker.txt"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const Json summary = Json::parse(slurp(a / "summary.json"));
  CHECK(summary.at("config_hash").get<std::string>() == cfg.hash());
  std::istringstream cfg_text(slurp(a / "config.txt"));
  CHECK(parse_config(cfg_text).hash() == cfg.hash());
}

TEST_CASE("small perturbed run") {
  ExperimentConfig cfg = small_sym();
  const fs::path dir = tmp_dir("small_sym");
  cfg.out = dir.string();
  cfg.check_invariants = true;
  const ExperimentResult res = run_experiment(cfg);
  CHECK(res.trace.converged);
  CHECK(res.trace.rows.back().dist <= cfg.eps_target);
  CHECK(res.trace.invariants.descent_violations == 0);
  CHECK(res.trace.invariants.levelset_violations == 0);
  CHECK(res.trace.invariants.confinement_violations == 0);
  REQUIRE(res.params.has_value());
  CHECK(res.eta == doctest::Approx(res.params->eta));

  const Trace back = read_trace_csv((dir / "trace.csv").string());
  CHECK(back.rows.size() == res.trace.rows.size());
  const Trace marker = read_trace_csv((dir / "marker.csv").string());
  REQUIRE(marker.rows.size() == 1);
  CHECK(marker.rows[0].t == res.trace.region_entry());
  CHECK(marker.rows[0].in_region);
  const Json summary = Json::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("region_entry").get<long>() == res.trace.region_entry());
  CHECK(summary.at("iterations").get<long>() == res.trace.iterations());
}

TEST_CASE("plot data") {
  SUBCASE("one-row trace") {
    Trace tr;
    tr.rows.push_back({0, 1.0, 2.0, 3.0, false, false, 1});
    const fs::path dir = tmp_dir("plot_one");
    emit_plot_data(tr, dir.string());
    CHECK(slurp(dir / "dist.csv") == "t,dist\n0,3\n");
    CHECK(slurp(dir / "grad_norm.csv") == "t,grad_norm\n0,2\n");
    CHECK(slurp(dir / "marker.txt") == "-1\n");
  }
  SUBCASE("series copy the trace columns") {
    Trace tr;
    for (long t = 0; t < 10; ++t)
      tr.rows.push_back({t, 1.0 / (t + 1), 0.1 * t + 1.0 / 3.0, std::exp(-0.3 * t), t >= 4, t == 2, t < 6 ? 1 : 2});
    const fs::path dir = tmp_dir("plot_ten");
    emit_plot_data(tr, dir.string());
    CHECK(std::stol(slurp(dir / "marker.txt")) == 4);
    std::istringstream dist(slurp(dir / "dist.csv"));
    std::istringstream grad(slurp(dir / "grad_norm.csv"));
    std::string line;
    std::getline(dist, line);
    std::getline(grad, line);
    for (const auto& row : tr.rows) {
      long t = 0;
      char comma = 0;
      double v = 0.0;
      dist >> t >> comma >> v;
      CHECK(t == row.t);
      CHECK(v == row.dist);
      grad >> t >> comma >> v;
      CHECK(v == row.grad_norm);
    }
    CHECK_THROWS_AS(emit_plot_data(Trace{}, dir.string()), std::invalid_argument);
  }
}
