#pragma once

// Boundary data of an MP-system: time-free actions, the boundary action
// function by shooting, the scattering relation and its conversion to and from
// the reduced magnetic system, two-energy boundary recovery, gauge transforms.

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mprig/flow.hpp"

namespace mprig {

/// A curve on [0, T] given by position and velocity.
struct ParametricCurve {
  double duration = 0.0;
  std::function<Vec2(double)> position;
  std::function<Vec2(double)> velocity;
};

/// 1/2 int |gamma'|^2 dt + kT - int alpha(gamma') dt - int U dt, by Gauss-Legendre
/// quadrature on the dense output segments.
double time_free_action(const MPSystem& sys, double k, const Trajectory& curve);
/// Same functional on `panels` equal subintervals.
double time_free_action(const MPSystem& sys, double k, const ParametricCurve& curve, int panels = 64);

struct ShootingOptions {
  int max_iterations = 50;
  double tolerance = 1e-11;   // chart distance |gamma(T) - y|
  /// A stalled Newton iteration is accepted at this residual: the integrator's
  /// noise floor can sit above `tolerance` on steep coefficients.
  double stall_tolerance = 1e-9;
  double fd_step = 1e-5;      // central difference in theta
  FlowOptions flow;
};

struct ActionResult {
  double value = 0.0;      // 2kT - int alpha - 2 int U
  double time = 0.0;       // T_{x,y}
  Vec2 direction;          // initial velocity on the energy level
  double theta = 0.0;      // chart angle of direction
  int iterations = 0;
  double residual = 0.0;   // |gamma(T) - y|
  double exit_mismatch = 0.0;  // distance from the exit point of a re-integration to y
};

/// Solves exp_x(T xi(theta)) = y by damped Newton; throws kNoConvergence with
/// the residual in the message when neither tolerance is met.
ActionResult boundary_action(const MPSystem& sys, double k, Vec2 x, Vec2 y, const ShootingOptions& opts = {});

struct ScatterRecord {
  Vec2 x;
  Vec2 xi;
  Vec2 y;
  Vec2 eta;
  std::optional<double> tau;  // absent for records produced by conversion
};

ScatterRecord scattering(const MPSystem& sys, double k, Vec2 x, Vec2 xi, const FlowOptions& opts = {});

/// Maps (x, v) to a scattering record of some system.
using ScatterOracle = std::function<ScatterRecord(Vec2, Vec2)>;

/// S(x, xi) = 2[k - U(y)] S_G(x, xi / (2(k - U(x)))), with y the base point of S_G.
ScatterRecord scattering_from_magnetic(const MPSystem& sys, double k, const ScatterOracle& magnetic, Vec2 x,
                                       Vec2 xi);
/// S_G(x, v) = S(x, 2(k - U(x)) v) / (2(k - U(y))), with y the base point of S.
ScatterRecord magnetic_from_scattering(const MPSystem& sys, double k, const ScatterOracle& mp, Vec2 x, Vec2 v);

/// Boundary values recovered at one point from boundary action limits.
struct RecoveredBoundary {
  double norm_xi = 0.0;    // |xi|_g
  double alpha_xi = 0.0;   // alpha(xi)
  double potential = 0.0;  // U(x)
  double q1 = 0.0;         // sqrt(2(k1 - U)) |xi|_g
  double q2 = 0.0;
  double residual = 0.0;   // largest Richardson residual among the four limits
};

using ActionOracle = std::function<double(Vec2, Vec2)>;

/// One-sided limit lim A(x, c(+-s)) / s by two Richardson levels over
/// s0, s0/2, s0/4. `residual` receives |R2 - R1(s0/2)|.
double boundary_limit(const ActionOracle& action, const std::function<Vec2(double)>& curve, int side, double s0,
                      double* residual = nullptr);

/// curve(0) = x, curve'(0) = xi. Throws kExtrapolation if a residual exceeds
/// `extrapolation_tol`.
RecoveredBoundary recover_boundary_data(const ActionOracle& a1, double k1, const ActionOracle& a2, double k2,
                                        const std::function<Vec2(double)>& curve, double s0 = 1e-2,
                                        double extrapolation_tol = 1e-3);

/// Boundary-fixing diffeomorphism f = (fx, fy) and a function phi vanishing on
/// the boundary.
struct GaugeTransform {
  Expr fx = Expr::var(Coord::kX);
  Expr fy = Expr::var(Coord::kY);
  Expr phi{0.0};
};

/// (f*g, f*alpha + d phi, U o f), keeping rho. Checks the boundary conditions to
/// 1e-9 and the Jacobian determinant on domain samples.
MPSystem apply_gauge(const MPSystem& sys, const GaugeTransform& gauge);

// --- tables ----------------------------------------------------------------

struct ActionRow {
  double k = 0.0;
  double x_angle = 0.0;
  double y_angle = 0.0;
  ActionResult result;
};

/// All ordered pairs of n boundary points at angles 2 pi i / n, diagonal excluded.
std::vector<ActionRow> action_table(const MPSystem& sys, double k, int n, const ShootingOptions& opts = {});
void write_action_csv(std::ostream& os, const std::vector<ActionRow>& rows);

struct ScatterRow {
  double k = 0.0;
  double x_angle = 0.0;
  double psi = 0.0;  // angle from the inward normal
  ScatterRecord record;
};

/// n_points boundary points times n_dirs inward directions at angles from the
/// normal spread over (-pi/2, pi/2).
std::vector<ScatterRow> scatter_table(const MPSystem& sys, double k, int n_points, int n_dirs,
                                      const FlowOptions& opts = {});
void write_scatter_csv(std::ostream& os, const std::vector<ScatterRow>& rows);

}  // namespace mprig
