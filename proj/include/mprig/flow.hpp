#pragma once

// MP-geodesic flow: integration, exit events and the MP-exponential map.

#include <array>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "mprig/dop853.hpp"
#include "mprig/geometry.hpp"

namespace mprig {

struct PhaseState {
  Vec2 x;
  Vec2 xi;
  double t = 0.0;
};

struct ExitEvent {
  double tau = 0.0;
  PhaseState state;
};

struct FlowOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double max_time = 200.0;
  /// Abort threshold on |E - k| / max(1, k).
  double energy_tol = 1e-6;
  /// |rho| below this counts as a boundary point.
  double boundary_tol = 1e-8;
  /// Starts with <xi, nu> / |xi| below this use the quadratic exit model.
  double tangent_threshold = 1e-6;
  /// Target |rho| at a located exit.
  double exit_tol = 1e-10;
};

/// Integration stop rule. The state vector carries the running integrals of U
/// and alpha(gamma') next to position and velocity.
struct Stop {
  enum class Kind { kExit, kTime };
  Kind kind = Kind::kExit;
  double time = 0.0;
  /// Time stops only: allow the curve to leave {rho >= 0}.
  bool allow_exterior = false;

  static Stop exit() { return {}; }
  static Stop at_time(double t, bool allow_exterior = false) {
    return {Kind::kTime, t, allow_exterior};
  }
};

using FlowState = std::array<double, 6>;  // x, y, xi1, xi2, int U dt, int alpha(xi) dt

class Trajectory {
 public:
  double energy_tag = 0.0;
  std::vector<PhaseState> samples;
  std::optional<ExitEvent> exit;
  /// Factor applied to the initial velocity to put it on the energy level.
  double velocity_scale = 1.0;
  double max_energy_error = 0.0;

  double t_begin() const { return samples.empty() ? 0.0 : samples.front().t; }
  double t_end() const { return samples.empty() ? 0.0 : samples.back().t; }

  /// Dense-output state at t in [t_begin, t_end].
  PhaseState state_at(double t) const;
  FlowState raw_state_at(double t) const;
  /// int_0^t U(gamma) dt'
  double potential_integral(double t) const { return raw_state_at(t)[4]; }
  /// int_0^t alpha(gamma') dt'
  double alpha_integral(double t) const { return raw_state_at(t)[5]; }

  const std::vector<DenseSegment<6>>& segments() const { return segments_; }
  void add_segment(const DenseSegment<6>& s) { segments_.push_back(s); }
  /// Final polished state; overrides the dense output at t_end.
  void set_end_state(const FlowState& y) { end_state_ = y; }

  /// CSV with header t,x,y,xi1,xi2,energy.
  void write_csv(std::ostream& os, const MPSystem& sys) const;

 private:
  std::vector<DenseSegment<6>> segments_;
  std::optional<FlowState> end_state_;
};

struct MotionRates {
  Vec2 velocity;
  Vec2 acceleration;
};

/// Right-hand side of the MP equation at a phase point.
MotionRates mp_rhs(const MPSystem& sys, const PhaseState& s);

/// Full 6-component right-hand side used by the integrator.
FlowState flow_rhs(const MPSystem& sys, const FlowState& y);

/// Integrates from (x0, xi0). xi0 is rescaled onto the energy level k; the
/// factor is reported in Trajectory::velocity_scale.
Trajectory integrate(const MPSystem& sys, Vec2 x0, Vec2 xi0, double k, Stop stop,
                     const FlowOptions& opts = {});

/// Exit time of an inward boundary start.
double exit_time(const MPSystem& sys, Vec2 x, Vec2 xi, double k, const FlowOptions& opts = {});

/// pi(phi_t(x, xi)); throws kLeftDomain if the curve leaves before t.
Vec2 mp_exp(const MPSystem& sys, Vec2 x, double k, double t, Vec2 xi, const FlowOptions& opts = {});

/// Coefficients of h(t) ~ a t + b t^2 / 2 for h = rho_hat along the MP-geodesic
/// from a boundary point: a = <nu, xi>, b = Hess rho_hat(xi, xi) + <nu, Y(xi) - grad U>.
struct ExitModel {
  double a = 0.0;
  double b = 0.0;
};
ExitModel exit_model(const MPSystem& sys, Vec2 x, Vec2 xi);

/// Hess rho_hat(v, v) with the Levi-Civita connection of g.
double hessian_rho_hat(const MPSystem& sys, Vec2 x, Vec2 v);

}  // namespace mprig
