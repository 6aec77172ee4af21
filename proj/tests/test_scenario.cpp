#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mprig/experiments.hpp"

using namespace mprig;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_scenario(text, "t.cfg");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

const char* kCustom = R"(name = custom
# a comment line
[parameters]
B = 2.5
[system]
g11 = 1
g22 = 1
alpha1 = -B/2*y   # trailing comment
alpha2 = B/2*x
rho = 0.5*(1 - x^2 - y^2)
[energies]
k = 0.5
[sampling]
trajectories = 5
seed = 99
)";

}  // namespace

TEST_CASE("euclid-disk is the flat disk") {
  const Scenario s = load_scenario("euclid-disk");
  REQUIRE(s.primaries().size() == 1);
  CHECK(s.reference() == nullptr);
  const MPSystem& sys = s.primaries()[0];
  for (Vec2 p : {Vec2{0.0, 0.0}, Vec2{0.3, -0.5}}) {
    const Sym2 g = sys.metric(p);
    CHECK(g.a11 == 1.0);
    CHECK(g.a12 == 0.0);
    CHECK(g.a22 == 1.0);
    CHECK(euclidean_norm(sys.alpha(p)) == 0.0);
    CHECK(sys.potential(p) == 0.0);
  }
  CHECK(s.energies.front() == 0.5);
}

TEST_CASE("counterexample-basic holds the two conformal systems at k = 3") {
  const Scenario s = load_scenario("counterexample-basic");
  REQUIRE(s.primaries().size() == 2);
  REQUIRE(s.reference() != nullptr);
  CHECK(s.energies == std::vector<double>{3.0});
  const Vec2 p{0.2, 0.4};
  CHECK(s.primaries()[0].metric(p).a11 == 0.25);
  CHECK(s.primaries()[1].metric(p).a22 == 0.5);
  CHECK(s.primaries()[0].potential(p) == 1.0);
  CHECK(s.primaries()[1].potential(p) == 2.0);
  // both reduce to the reference metric
  for (const MPSystem& sys : s.primaries()) {
    CHECK(maupertuis_metric(sys, 3.0).metric(p).a11 == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(s.primaries()[0].magnetic_field(p) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("counterexample-collar agrees on the boundary and differs inside") {
  const Scenario s = load_scenario("counterexample-collar");
  REQUIRE(s.primaries().size() == 2);
  const MPSystem& phi = s.primaries()[0];
  const MPSystem& psi = s.primaries()[1];
  for (double a : {0.0, 1.0, 2.0, 4.0}) {
    const Vec2 b = boundary_point(phi, a);
    CHECK(phi.metric(b).a11 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(psi.metric(b).a11 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(phi.potential(b) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(psi.potential(b) == doctest::Approx(1.5).epsilon(1e-12));
  }
  const Vec2 o{0.0, 0.0};
  CHECK(phi.potential(o) == 1.0);
  CHECK(psi.potential(o) == 2.0);
  CHECK(phi.metric(o).a11 == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(psi.metric(o).a11 == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("every built-in scenario qualifies") {
  for (const std::string& name : builtin_scenarios()) {
    CAPTURE(name);
    const Qualification q = qualify(load_scenario(name));
    CHECK(q.passed());
    CHECK(q.checks.size() >= 3);
  }
}

TEST_CASE("config errors carry the line number") {
  CHECK(config_error("name = a\n[system]\ng11 = 1 +\n").find("t.cfg:3:") != std::string::npos);
  CHECK(config_error("name = a\n[bogus]\n").find("t.cfg:2: unknown section") != std::string::npos);
  CHECK(config_error("name = a\n[system]\ncolour = red\n").find(":3:") != std::string::npos);
  CHECK(config_error("name = a\n[energies]\nk = 1, x\n").find(":3:") != std::string::npos);
  CHECK(config_error("name = a\n[system]\ng11 = q*x\n").find(":3:") != std::string::npos);
  CHECK(config_error("name = a\n[sampling]\nboundary = 0\n").find(":3:") != std::string::npos);
  CHECK(config_error("k = 3\n").find(":1:") != std::string::npos);
  CHECK(config_error("name = a\n[system\n").find(":2:") != std::string::npos);
  CHECK(config_error("name = a\n[system]\ng11 1\n").find(":3:") != std::string::npos);
}

TEST_CASE("incomplete scenarios are rejected") {
  CHECK(config_error("[system]\ng11 = 1\ng22 = 1\nrho = 1\n[energies]\nk = 1\n").find("missing 'name'") !=
        std::string::npos);
  CHECK(config_error("name = a\n[energies]\nk = 1\n").find("no [system]") != std::string::npos);
  CHECK(config_error("name = a\n[system]\ng11 = 1\ng22 = 1\nrho = 1\n").find("no energies") != std::string::npos);
  // the failing system is located by its section line
  CHECK(config_error("name = a\n[system]\ng11 = 1\n[system]\ng11 = 1\ng22 = 1\nrho = 1\n[energies]\nk = 1\n")
            .find(":2:") != std::string::npos);
  const std::string two_refs =
      "name = a\n[system]\nrole = reference\ng11 = 1\ng22 = 1\nrho = 1\n"
      "[system]\nrole = reference\ng11 = 1\ng22 = 1\nrho = 1\n[energies]\nk = 1\n";
  CHECK(config_error(two_refs).find("at most one reference") != std::string::npos);
}

TEST_CASE("parameters, comments and sampling keys are honoured") {
  Scenario s = parse_scenario(kCustom);
  s.bind();
  CHECK(s.name == "custom");
  CHECK(s.parameters.at("B") == 2.5);
  CHECK(s.sampling.trajectories == 5);
  CHECK(s.sampling.seed == 99);
  CHECK(s.primaries()[0].magnetic_field({0.1, 0.1}) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("scenario files load from disk and missing files report kIo") {
  const auto path = std::filesystem::temp_directory_path() / "mprig_test_scenario.cfg";
  {
    std::ofstream out(path);
    out << builtin_scenario_text("mp-quadratic");
  }
  const Scenario s = load_scenario(path.string());
  CHECK(s.name == "mp-quadratic");
  CHECK(s.primaries()[0].potential({1.0, 0.0}) == doctest::Approx(0.2).epsilon(1e-15));
  std::filesystem::remove(path);
  try {
    load_scenario("/nonexistent/scenario.cfg");
    FAIL("expected kIo");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}

TEST_CASE("experiments refuse scenarios that fail qualification") {
  Scenario strong = parse_scenario(kCustom);
  strong.bind();
  const Qualification q = qualify(strong);
  CHECK_FALSE(q.passed());
  CHECK(q.text().find("FAIL") != std::string::npos);
  try {
    run_experiment(strong, "energy");
    FAIL("expected kQualification");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kQualification);
    CHECK(std::string(e.what()).find("strictly MP-convex") != std::string::npos);
  }

  const Scenario quad = load_scenario("mp-quadratic");
  RunOptions low;
  low.k = 0.1;  // below sup U = 0.2
  CHECK_THROWS_AS(run_experiment(quad, "energy", low), Error);
}

TEST_CASE("unknown experiments and single-system pair experiments are rejected") {
  const Scenario s = load_scenario("euclid-disk");
  try {
    run_experiment(s, "no-such-thing");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
  CHECK_THROWS_AS(run_experiment(s, "action-match"), Error);
  CHECK(experiment_names().size() == 12);
}

TEST_CASE("reports are reproducible and record the seed") {
  const Scenario s = load_scenario("mp-warped");
  RunOptions o;
  o.samples = 6;
  const Report a = run_experiment(s, "energy", o);
  const Report b = run_experiment(s, "energy", o);
  CHECK(a.summary() == b.summary());
  REQUIRE(a.tables.size() == 1);
  CHECK(a.tables[0].csv == b.tables[0].csv);
  CHECK(a.summary().find("# seed: 7") != std::string::npos);

  o.seed = 8;
  const Report c = run_experiment(s, "energy", o);
  CHECK(c.summary().find("# seed: 8") != std::string::npos);
  CHECK(c.tables[0].csv != a.tables[0].csv);
}

TEST_CASE("tolerance overrides change the threshold") {
  Scenario s = parse_scenario(builtin_scenario_text("magnetic-disk") + "[tolerances]\nmax_relative_energy_error = 1e-300\n");
  s.bind();
  RunOptions o;
  o.samples = 4;
  const Report r = run_experiment(s, "energy", o);
  const Metric* m = r.find("max_relative_energy_error");
  REQUIRE(m != nullptr);
  CHECK(m->threshold == 1e-300);
  CHECK(r.passed() == (m->value <= 1e-300));
}

TEST_CASE("reports write their summary and tables") {
  const Scenario s = load_scenario("euclid-disk");
  RunOptions o;
  o.samples = 8;
  const Report r = run_experiment(s, "convexity", o);
  CHECK(r.passed());
  const auto dir = std::filesystem::temp_directory_path() / "mprig_test_report";
  std::filesystem::remove_all(dir);
  r.write(dir);
  CHECK(std::filesystem::exists(dir / "summary.txt"));
  CHECK(std::filesystem::exists(dir / "convexity_flat.csv"));
  std::ifstream in(dir / "convexity_flat.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "angle,margin_mp,margin_G");
  std::filesystem::remove_all(dir);
}
