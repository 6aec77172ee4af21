#pragma once

// Second fundamental form of the boundary, the strict MP-convexity margin and
// the conformal transformation laws relating it to the reduced magnetic
// system.

#include <algorithm>
#include <iosfwd>
#include <vector>

#include "mprig/flow.hpp"

namespace mprig {

/// Lambda(x, v) = -Hess rho_hat(v, v), rho_hat = rho / |grad rho|_g.
/// Throws kNotTangent if |<v, nu>_g| > tol |v|_g.
double second_fundamental_form(const MPSystem& sys, Vec2 x, Vec2 v, double tol = 1e-8);

/// <Y(v), nu>_g with nu the inward g-unit normal.
double lorentz_normal_pairing(const MPSystem& sys, Vec2 x, Vec2 v);

/// Lambda(x, v) - <Y(v), nu> + dU(nu). Requires |v|^2_g = 2(k - U(x)) to a
/// relative 1e-8 (kEnergyLevel otherwise).
double mp_convexity_margin(const MPSystem& sys, double k, Vec2 x, Vec2 v, double tol = 1e-8);

struct ConformalCheck {
  double lambda_direct = 0.0;    // Lambda_G(x, xi) on the reduced system
  double lambda_formula = 0.0;   // sqrt(c) Lambda(x, xi) + dU(nu) |xi|^2 / sqrt(c)
  double lorentz_direct = 0.0;   // <Y_G(xi), n>_G
  double lorentz_formula = 0.0;  // <Y(xi), nu> / sqrt(c)
  double margin_mp = 0.0;        // mp_convexity_margin(sys, k, x, xi)
  double margin_g = 0.0;         // magnetic margin of the reduced system at v = xi / c
  double margin_g_formula = 0.0; // c^{-3/2} margin_mp
  double discrepancy() const;    // largest of the three direct/formula gaps
};

/// c = 2(k - U(x)). `gsys` must be maupertuis_metric(sys, k); xi is tangent
/// with |xi|^2_g = c.
ConformalCheck conformal_convexity_check(const MPSystem& sys, const MPSystem& gsys, double k, Vec2 x, Vec2 xi);
ConformalCheck conformal_convexity_check(const MPSystem& sys, double k, Vec2 x, Vec2 xi);

/// Positive root -2a/b of a t + b t^2 / 2, a = <nu, xi>, b = Hess rho_hat(xi, xi)
/// + <nu, Y(xi) - grad U>. Throws kNonConvex if b >= 0 and kInvalidArgument if
/// a < -1e-12 |xi|.
double tangent_exit_model(const MPSystem& sys, double k, Vec2 x, Vec2 xi);

struct ConvexitySample {
  double angle = 0.0;
  Vec2 x;
  /// Both orientations of the boundary tangent: [0] counterclockwise.
  double margin_mp[2] = {0.0, 0.0};
  double margin_g[2] = {0.0, 0.0};
  double min_mp() const { return std::min(margin_mp[0], margin_mp[1]); }
  double min_g() const { return std::min(margin_g[0], margin_g[1]); }
};

/// n boundary points at chart angles 2 pi i / n. The reduced margin is computed
/// on maupertuis_metric(sys, k) independently of the MP margin.
std::vector<ConvexitySample> convexity_sweep(const MPSystem& sys, double k, int n = 64);
/// One row per sample, reporting the smaller margin over the two orientations.
void write_convexity_csv(std::ostream& os, const std::vector<ConvexitySample>& rows);

}  // namespace mprig
