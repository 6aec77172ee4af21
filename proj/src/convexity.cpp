#include "mprig/convexity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mprig/parallel.hpp"

namespace mprig {

namespace {

void require_tangent(const MPSystem& sys, Vec2 x, Vec2 v, double tol) {
  const Vec2 nu = boundary_normal(sys, x);
  const double along = inner(sys, x, nu, v);
  if (std::abs(along) > tol * std::max(norm(sys, x, v), 1e-300)) {
    std::ostringstream os;
    os << "vector is not tangent to the boundary (<v, nu> = " << along << ")";
    throw Error(ErrorCode::kNotTangent, os.str());
  }
}

void require_energy(const MPSystem& sys, double k, Vec2 x, Vec2 v) {
  const double c = 2.0 * (k - sys.potential(x));
  if (!(c > 0.0)) throw Error(ErrorCode::kEnergyLevel, "energy does not exceed U at the boundary point");
  const double n2 = sys.metric(x).quadratic(v, v);
  if (std::abs(n2 - c) > 1e-8 * c) {
    std::ostringstream os;
    os << "|v|^2 = " << n2 << " differs from 2(k - U) = " << c;
    throw Error(ErrorCode::kEnergyLevel, os.str());
  }
}

}  // namespace

double second_fundamental_form(const MPSystem& sys, Vec2 x, Vec2 v, double tol) {
  require_tangent(sys, x, v, tol);
  return -hessian_rho_hat(sys, x, v);
}

double lorentz_normal_pairing(const MPSystem& sys, Vec2 x, Vec2 v) {
  const LocalGeometry lg = sys.local(x);
  return lg.g.quadratic(lorentz_force(lg, v), boundary_normal(sys, x));
}

double mp_convexity_margin(const MPSystem& sys, double k, Vec2 x, Vec2 v, double tol) {
  require_energy(sys, k, x, v);
  const double lambda = second_fundamental_form(sys, x, v, tol);
  const Vec2 nu = boundary_normal(sys, x);
  return lambda - lorentz_normal_pairing(sys, x, v) + dot(sys.potential_differential(x), nu);
}

double ConformalCheck::discrepancy() const {
  return std::max({std::abs(lambda_direct - lambda_formula), std::abs(lorentz_direct - lorentz_formula),
                   std::abs(margin_g - margin_g_formula)});
}

ConformalCheck conformal_convexity_check(const MPSystem& sys, const MPSystem& gsys, double k, Vec2 x, Vec2 xi) {
  require_energy(sys, k, x, xi);
  const double c = 2.0 * (k - sys.potential(x));
  const double rc = std::sqrt(c);
  const Vec2 nu = boundary_normal(sys, x);
  const double du_nu = dot(sys.potential_differential(x), nu);
  const double xi2 = sys.metric(x).quadratic(xi, xi);

  ConformalCheck r;
  r.lambda_direct = second_fundamental_form(gsys, x, xi);
  r.lambda_formula = rc * second_fundamental_form(sys, x, xi) + du_nu * xi2 / rc;
  r.lorentz_direct = lorentz_normal_pairing(gsys, x, xi);
  r.lorentz_formula = lorentz_normal_pairing(sys, x, xi) / rc;
  r.margin_mp = mp_convexity_margin(sys, k, x, xi);
  r.margin_g = mp_convexity_margin(gsys, 0.5, x, xi / c);
  r.margin_g_formula = std::pow(c, -1.5) * r.margin_mp;
  return r;
}

ConformalCheck conformal_convexity_check(const MPSystem& sys, double k, Vec2 x, Vec2 xi) {
  return conformal_convexity_check(sys, maupertuis_metric(sys, k), k, x, xi);
}

double tangent_exit_model(const MPSystem& sys, double k, Vec2 x, Vec2 xi) {
  if (!(k > sys.potential(x))) throw Error(ErrorCode::kEnergyLevel, "energy does not exceed U");
  const ExitModel m = exit_model(sys, x, xi);
  if (m.a < -1e-12 * euclidean_norm(xi)) throw Error(ErrorCode::kInvalidArgument, "velocity points outward");
  if (!(m.b < 0.0)) {
    std::ostringstream os;
    os << "quadratic coefficient " << m.b << " is not negative";
    throw Error(ErrorCode::kNonConvex, os.str());
  }
  return std::max(0.0, -2.0 * m.a / m.b);
}

std::vector<ConvexitySample> convexity_sweep(const MPSystem& sys, double k, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one sample");
  const MPSystem gsys = maupertuis_metric(sys, k);
  std::vector<ConvexitySample> rows(n);
  parallel_for(rows.size(), [&](std::size_t i) {
    ConvexitySample& s = rows[i];
    s.angle = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    s.x = boundary_point(sys, s.angle);
    const double c = 2.0 * (k - sys.potential(s.x));
    if (!(c > 0.0)) throw Error(ErrorCode::kEnergyLevel, "energy does not exceed U on the boundary");
    const Vec2 t = boundary_unit_tangent(sys, s.x);
    const Vec2 tg = boundary_unit_tangent(gsys, s.x);
    for (int o = 0; o < 2; ++o) {
      const double sign = o == 0 ? 1.0 : -1.0;
      s.margin_mp[o] = mp_convexity_margin(sys, k, s.x, sign * std::sqrt(c) * t);
      s.margin_g[o] = mp_convexity_margin(gsys, 0.5, s.x, sign * tg);
    }
  });
  return rows;
}

void write_convexity_csv(std::ostream& os, const std::vector<ConvexitySample>& rows) {
  os << "angle,margin_mp,margin_G\n";
  char line[128];
  for (const ConvexitySample& s : rows) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", s.angle, s.min_mp(), s.min_g());
    os << line;
  }
}

}  // namespace mprig
