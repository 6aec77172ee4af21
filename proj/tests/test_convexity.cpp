#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mprig/convexity.hpp"

using namespace mprig;

namespace {

constexpr double kPi = std::numbers::pi;
const char* kDisk = "0.5*(1 - x^2 - y^2)";

MPSystem euclid(const char* a1, const char* a2, const char* u, const char* rho = kDisk) {
  return MPSystem::from_strings("e", "1", "0", "1", a1, a2, u, rho);
}

MPSystem warped() {
  return MPSystem::from_strings("warped", "1 + 0.1*y^2", "0.05*x*y", "1 + 0.1*x^2", "-0.15*y",
                                "0.15*x + 0.05*x^2", "0.3*x + 0.1*y^2", kDisk);
}

Vec2 on_circle(double a) { return {std::cos(a), std::sin(a)}; }
Vec2 ccw(double a) { return {-std::sin(a), std::cos(a)}; }

}  // namespace

TEST_CASE("second fundamental form of round disks") {
  const MPSystem unit = euclid("0", "0", "0");
  const MPSystem big = euclid("0", "0", "0", "0.5*(4 - x^2 - y^2)");
  for (double a : {0.0, 1.0, 2.5, 4.0}) {
    CHECK(second_fundamental_form(unit, on_circle(a), ccw(a)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(second_fundamental_form(big, 2.0 * on_circle(a), ccw(a)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(second_fundamental_form(unit, on_circle(a), -3.0 * ccw(a)) == doctest::Approx(9.0).epsilon(1e-12));
  }
}

TEST_CASE("second fundamental form rejects non-tangent vectors") {
  const MPSystem sys = euclid("0", "0", "0");
  try {
    second_fundamental_form(sys, {1.0, 0.0}, {0.1, 1.0});
    FAIL("expected kNotTangent");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotTangent);
  }
}

TEST_CASE("margins on flat disks") {
  const MPSystem free = euclid("0", "0", "0");
  CHECK(mp_convexity_margin(free, 0.5, {0.0, 1.0}, {1.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-12));

  const double B = 0.3;
  const MPSystem mag = euclid("-0.15*y", "0.15*x", "0");
  for (double a : {0.2, 3.0}) {
    CHECK(mp_convexity_margin(mag, 0.5, on_circle(a), ccw(a)) == doctest::Approx(1.0 - B).epsilon(1e-12));
    CHECK(mp_convexity_margin(mag, 0.5, on_circle(a), -ccw(a)) == doctest::Approx(1.0 + B).epsilon(1e-12));
  }

  // U = 0.2 r^2: dU(nu) = -0.4 on the unit circle, Lambda(v) = |v|^2 = 2(k - 0.2)
  const MPSystem pot = euclid("0", "0", "0.2*(x^2 + y^2)");
  const double k = 1.0;
  const Vec2 v = std::sqrt(2.0 * (k - 0.2)) * ccw(0.7);
  CHECK(mp_convexity_margin(pot, k, on_circle(0.7), v) == doctest::Approx(2.0 * (k - 0.2) - 0.4).epsilon(1e-12));
  CHECK_THROWS_AS(mp_convexity_margin(pot, k, on_circle(0.7), ccw(0.7)), Error);
}

TEST_CASE("conformal laws reduce to identities when G = g") {
  const MPSystem sys = euclid("-0.15*y", "0.15*x", "0");
  const ConformalCheck c = conformal_convexity_check(sys, 0.5, on_circle(1.0), ccw(1.0));
  CHECK(c.lambda_direct == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.lambda_formula == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.lorentz_direct == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(c.margin_g == doctest::Approx(c.margin_mp).epsilon(1e-12));
}

TEST_CASE("conformal laws agree on constant and nonconstant potentials") {
  const MPSystem constant = MPSystem::from_strings("c", "0.25", "0", "0.25", "-0.15*y", "0.15*x", "1", kDisk);
  const MPSystem w = warped();
  for (const auto& [sys, k] : {std::pair{&constant, 3.0}, {&w, 1.2}}) {
    const MPSystem G = maupertuis_metric(*sys, k);
    for (int i = 0; i < 16; ++i) {
      const Vec2 x = boundary_point(*sys, 2.0 * kPi * i / 16);
      const double c = 2.0 * (k - sys->potential(x));
      for (double sign : {1.0, -1.0}) {
        const Vec2 xi = sign * std::sqrt(c) * boundary_unit_tangent(*sys, x);
        const ConformalCheck r = conformal_convexity_check(*sys, G, k, x, xi);
        CHECK(r.discrepancy() < 1e-8);
        CHECK((r.margin_mp > 0) == (r.margin_g > 0));
        // scaled-vector form: Lambda_G(x, xi / c) = c^{-3/2} (Lambda(x, xi) + dU(nu))
        const double lhs = second_fundamental_form(G, x, xi / c);
        const double du = dot(sys->potential_differential(x), boundary_normal(*sys, x));
        CHECK(lhs == doctest::Approx(std::pow(c, -1.5) * (second_fundamental_form(*sys, x, xi) + du)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sweep signs agree and the CSV has its header") {
  const MPSystem sys = warped();
  const auto rows = convexity_sweep(sys, 1.0, 32);
  CHECK(rows.size() == 32);
  for (const ConvexitySample& s : rows) {
    for (int o = 0; o < 2; ++o) CHECK((s.margin_mp[o] > 0) == (s.margin_g[o] > 0));
    CHECK(s.min_mp() > 0.0);
  }
  std::ostringstream os;
  write_convexity_csv(os, rows);
  CHECK(os.str().rfind("angle,margin_mp,margin_G\n", 0) == 0);

  const MPSystem strong = euclid("-0.75*y", "0.75*x", "0");
  const auto bad = convexity_sweep(strong, 0.5, 8);
  for (const ConvexitySample& s : bad) {
    CHECK(s.margin_mp[0] == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(s.margin_g[0] < 0.0);
  }
}

TEST_CASE("tangent exit model on the flat disk") {
  const MPSystem sys = euclid("0", "0", "0");
  CHECK(tangent_exit_model(sys, 0.5, {-1.0, 0.0}, {0.0, 1.0}) == 0.0);
  for (double eps : {1e-3, 1e-2, 0.05}) {
    const Vec2 xi{eps, std::sqrt(1.0 - eps * eps)};
    const double model = tangent_exit_model(sys, 0.5, {-1.0, 0.0}, xi);
    // Hess rho_hat = r r - (I - r r) on the unit circle
    CHECK(model == doctest::Approx(2.0 * eps / (1.0 - 2.0 * eps * eps)).epsilon(1e-12));
    CHECK(std::abs(model - exit_time(sys, {-1.0, 0.0}, xi, 0.5)) <= 0.1 * 2.0 * eps);
  }
}

TEST_CASE("tangent exit model tracks measured exit times on a warped system") {
  const MPSystem sys = warped();
  const double k = 1.0;
  for (int i = 0; i < 12; ++i) {
    const double angle = 2.0 * kPi * i / 12;
    for (double eps : {0.01, 0.03, 0.05}) {
      const BoundaryStart s = inward_start(sys, k, angle, 0.5 * kPi - std::asin(eps));
      const Vec2 nu = boundary_normal(sys, s.x);
      REQUIRE(inner(sys, s.x, nu, s.xi) <= 0.05 * norm(sys, s.x, s.xi) + 1e-12);
      const double model = tangent_exit_model(sys, k, s.x, s.xi);
      const double measured = exit_time(sys, s.x, s.xi, k);
      CHECK(std::abs(model - measured) <= 0.1 * measured);
    }
  }
}

TEST_CASE("tangent exit model rejects non-convex points and outward velocities") {
  const MPSystem strong = euclid("-0.75*y", "0.75*x", "0");
  try {
    tangent_exit_model(strong, 0.5, {1.0, 0.0}, {0.0, 1.0});
    FAIL("expected kNonConvex");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonConvex);
  }
  const MPSystem flat = euclid("0", "0", "0");
  CHECK_THROWS_AS(tangent_exit_model(flat, 0.5, {1.0, 0.0}, {0.1, 1.0}), Error);
}

TEST_CASE("tangent starts at strictly convex points leave the closed domain at once") {
  const MPSystem sys = warped();
  const double k = 1.0;
  for (int i = 0; i < 16; ++i) {
    const double angle = 2.0 * kPi * i / 16;
    for (double sign : {1.0, -1.0}) {
      const Vec2 x = boundary_point(sys, angle);
      const Vec2 xi = sign * boundary_unit_tangent(sys, x);
      const Trajectory t = integrate(sys, x, xi, k, Stop::at_time(1e-2, true));
      for (double s : {1e-4, 1e-3, 1e-2}) CHECK(sys.rho(t.state_at(s).x) < 0.0);
    }
  }
}
