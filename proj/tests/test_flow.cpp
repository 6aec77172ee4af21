#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mprig/flow.hpp"

using namespace mprig;

namespace {

const char* kDisk = "0.5*(1 - x^2 - y^2)";

MPSystem euclid(const std::string& a1 = "0", const std::string& a2 = "0", const std::string& u = "0",
                const char* rho = kDisk) {
  return MPSystem::from_strings("euclid", "1", "0", "1", a1, a2, u, rho);
}

MPSystem warped() {
  return MPSystem::from_strings("warped", "1 + 0.1*y^2", "0.05*x*y", "1 + 0.1*x^2", "-0.15*y",
                                "0.15*x + 0.05*x^2", "0.3*x + 0.1*y^2", kDisk);
}

}  // namespace

TEST_CASE("right-hand side examples") {
  const MotionRates free = mp_rhs(euclid(), {{0.2, 0.1}, {0.5, -0.3}, 0.0});
  CHECK(free.acceleration == Vec2{0.0, 0.0});
  CHECK(free.velocity == Vec2{0.5, -0.3});

  const MotionRates well = mp_rhs(euclid("0", "0", "0.5*(x^2+y^2)"), {{1.0, 0.0}, {0.0, 0.0}, 0.0});
  CHECK(well.acceleration.x == doctest::Approx(-1.0));
  CHECK(well.acceleration.y == doctest::Approx(0.0));

  const double B = 0.6;
  const double v = 1.7;
  const MotionRates mag = mp_rhs(euclid("-0.3*y", "0.3*x"), {{0.1, 0.2}, {v, 0.0}, 0.0});
  CHECK(mag.acceleration.x == doctest::Approx(0.0));
  CHECK(mag.acceleration.y == doctest::Approx(B * v));
}

TEST_CASE("straight chords of the Euclidean disk") {
  const MPSystem sys = euclid();
  const Trajectory t = integrate(sys, {-1.0, 0.0}, {1.0, 0.0}, 0.5, Stop::exit());
  REQUIRE(t.exit);
  CHECK(t.exit->tau == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(t.exit->state.x.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(t.exit->state.x.y) < 1e-12);

  CHECK(exit_time(sys, {-1.0, 0.0}, {1.0, 0.0}, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  // Velocity is rescaled to the energy level and the factor reported.
  const Trajectory s = integrate(sys, {-1.0, 0.0}, {3.0, 0.0}, 2.0, Stop::exit());
  CHECK(s.velocity_scale == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("constant field gives gyration circles of radius sqrt(2k)/B") {
  const MPSystem sys = euclid("-0.5*y", "0.5*x", "0", "0.5*(9 - x^2 - y^2)");
  const Trajectory t = integrate(sys, {0.0, 0.0}, {1.0, 0.0}, 0.5, Stop::at_time(2.0 * std::numbers::pi));
  double worst = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double s = 2.0 * std::numbers::pi * i / 400.0;
    const PhaseState p = t.state_at(s);
    worst = std::max(worst, std::hypot(p.x.x - std::sin(s), p.x.y - (1.0 - std::cos(s))));
    worst = std::max(worst, std::hypot(p.xi.x - std::cos(s), p.xi.y - std::sin(s)));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("exactly tangent starts exit immediately") {
  const MPSystem sys = euclid();
  CHECK(exit_time(sys, {1.0, 0.0}, {0.0, 1.0}, 0.5) == 0.0);
  const MPSystem w = warped();
  const BoundaryStart s = inward_start(w, 1.0, 2.1, std::numbers::pi / 2.0);
  CHECK(exit_time(w, s.x, s.xi, 1.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("near-tangent chords have length 2 <xi, nu>") {
  const MPSystem sys = euclid();
  for (double eps : {1e-8, 1e-7, 5e-7, 1e-4, 0.05}) {
    const Vec2 xi{-eps, std::sqrt(1.0 - eps * eps)};
    const double tau = exit_time(sys, {1.0, 0.0}, xi, 0.5);
    CHECK(tau == doctest::Approx(2.0 * eps).epsilon(1e-8));
  }
}

TEST_CASE("located exits are on the boundary and outward") {
  const MPSystem sys = warped();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> psi(-1.5, 1.5);
  for (int n = 0; n < 100; ++n) {
    const BoundaryStart s = inward_start(sys, 1.0, angle(rng), psi(rng));
    const Trajectory t = integrate(sys, s.x, s.xi, 1.0, Stop::exit());
    REQUIRE(t.exit);
    const PhaseState& e = t.exit->state;
    CHECK(std::abs(sys.rho(e.x)) <= 1e-10);
    CHECK(t.exit->tau > 0.0);
    CHECK(inner(sys, e.x, e.xi, boundary_normal(sys, e.x, 1e-9)) < 0.0);
    CHECK(t.max_energy_error <= 1e-8);
  }
}

TEST_CASE("outward and exterior starts are rejected") {
  const MPSystem sys = euclid();
  CHECK_THROWS_AS(integrate(sys, {1.0, 0.0}, {1.0, 0.0}, 0.5, Stop::exit()), Error);
  CHECK_THROWS_AS(integrate(sys, {1.5, 0.0}, {-1.0, 0.0}, 0.5, Stop::exit()), Error);
  CHECK_THROWS_AS(integrate(euclid("0", "0", "x"), {0.0, 0.0}, {1.0, 0.0}, -0.5, Stop::exit()), Error);
}

TEST_CASE("trapped orbits report non-exit") {
  const MPSystem sys = euclid("-2.5*y", "2.5*x");
  FlowOptions opts;
  opts.max_time = 10.0;
  try {
    integrate(sys, {0.0, 0.0}, {1.0, 0.0}, 0.5, Stop::exit(), opts);
    FAIL("expected non-exit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoExit);
  }
}

TEST_CASE("exponential map") {
  const MPSystem sys = euclid();
  CHECK(mp_exp(sys, {0.1, 0.2}, 0.5, 0.0, {1.0, 0.0}) == Vec2{0.1, 0.2});
  const Vec2 p = mp_exp(sys, {-0.5, 0.0}, 2.0, 0.3, {0.0, 1.0});
  CHECK(p.x == doctest::Approx(-0.5));
  CHECK(p.y == doctest::Approx(0.6).epsilon(1e-12));

  const MPSystem w = warped();
  const Vec2 x{0.1, -0.2};
  const double k = 1.0;
  const Vec2 dir{0.3, 0.8};
  const double scale = std::sqrt(2.0 * (k - w.potential(x))) / norm(w, x, dir);
  const double h = 1e-6;
  const Vec2 fd = (mp_exp(w, x, k, h, dir) - x) / h;
  CHECK(std::abs(fd.x - scale * dir.x) < 1e-6);
  CHECK(std::abs(fd.y - scale * dir.y) < 1e-6);

  try {
    mp_exp(sys, {0.0, 0.0}, 0.5, 3.0, {1.0, 0.0});
    FAIL("expected a left-domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLeftDomain);
  }
}

TEST_CASE("energy is conserved and the flow composes") {
  const MPSystem sys = warped();
  const double k = 1.0;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int n = 0; n < 20; ++n) {
    const Vec2 x{u(rng), u(rng)};
    const Vec2 dir{u(rng), u(rng)};
    const double T = 0.6;
    const Trajectory full = integrate(sys, x, dir, k, Stop::at_time(T, true));
    double worst = 0.0;
    for (const PhaseState& s : full.samples) worst = std::max(worst, std::abs(energy(sys, s.x, s.xi) - k));
    CHECK(worst / k <= 1e-8);

    const PhaseState mid = full.state_at(0.5 * T);
    const Trajectory rest = integrate(sys, mid.x, mid.xi, k, Stop::at_time(0.5 * T, true));
    const PhaseState a = full.samples.back();
    const PhaseState b = rest.samples.back();
    CHECK(std::hypot(a.x.x - b.x.x, a.x.y - b.x.y) < 1e-8);
    CHECK(std::hypot(a.xi.x - b.xi.x, a.xi.y - b.xi.y) < 1e-8);
  }
}

TEST_CASE("line integrals along the dense output") {
  // The carried integral of alpha(gamma') against a fine trapezoid rule.
  const MPSystem sys = MPSystem::from_strings("slope", "1", "0", "1", "0.5*y", "x", "0", kDisk);
  const Trajectory t = integrate(sys, {0.0, -1.0}, {0.0, 1.0}, 0.5, Stop::exit());
  REQUIRE(t.exit);
  double sum = 0.0;
  const int n = 20000;
  const double tau = t.exit->tau;
  for (int i = 0; i < n; ++i) {
    const double t0 = tau * i / n;
    const double t1 = tau * (i + 1) / n;
    const PhaseState a = t.state_at(t0);
    const PhaseState b = t.state_at(t1);
    const double fa = 0.5 * a.x.y * a.xi.x + a.x.x * a.xi.y;
    const double fb = 0.5 * b.x.y * b.xi.x + b.x.x * b.xi.y;
    sum += 0.5 * (fa + fb) * (t1 - t0);
  }
  CHECK(t.alpha_integral(tau) == doctest::Approx(sum).epsilon(1e-7));
}

TEST_CASE("trajectory CSV export") {
  const MPSystem sys = euclid();
  const Trajectory t = integrate(sys, {-1.0, 0.0}, {1.0, 0.0}, 0.5, Stop::exit());
  std::ostringstream os;
  t.write_csv(os, sys);
  const std::string text = os.str();
  CHECK(text.rfind("t,x,y,xi1,xi2,energy\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(t.samples.size()) + 1);
}

TEST_CASE("DOP853 reaches its design order on a smooth scalar problem") {
  using S = std::array<double, 1>;
  auto f = [](double t, const S& y) { return S{std::cos(t) * y[0]}; };
  // Exact solution exp(sin t); global error of fixed steps scales like h^8.
  auto err = [&](int steps) {
    S y{1.0};
    const double h = 2.0 / steps;
    for (int i = 0; i < steps; ++i) y = Dop853<1>::single_step(f, i * h, y, h);
    return std::abs(y[0] - std::exp(std::sin(2.0)));
  };
  const double ratio = err(8) / err(16);
  CHECK(std::log2(ratio) > 7.0);
}

TEST_CASE("DOP853 dense output interpolates within tolerance") {
  using S = std::array<double, 2>;
  auto f = [](double, const S& y) { return S{y[1], -y[0]}; };
  Dop853<2> solver(f, 0.0, S{0.0, 1.0});
  double worst = 0.0;
  while (solver.t() < 10.0) {
    solver.step(10.0);
    const DenseSegment<2> seg = solver.dense();
    for (int i = 0; i <= 10; ++i) {
      const double t = seg.t0 + (seg.t1 - seg.t0) * i / 10.0;
      worst = std::max(worst, std::abs(seg(t)[0] - std::sin(t)));
    }
    CHECK(seg(seg.t1)[0] == doctest::Approx(solver.y()[0]).epsilon(1e-15));
  }
  CHECK(worst < 1e-8);
}
