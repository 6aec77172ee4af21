#pragma once

// Maupertuis reduction: an energy-k MP-geodesic reparametrised by arclength of
// G = 2(k - U) g is a unit-speed magnetic geodesic of (G, alpha).

#include <vector>

#include "mprig/flow.hpp"

namespace mprig {

/// An MP trajectory reparametrised by s(t) = int_0^t 2(k - U) dt'.
class ArclengthCurve {
 public:
  ArclengthCurve(const MPSystem& sys, double k, Trajectory traj);

  double k() const { return k_; }
  double length() const { return s_of_t(traj_.t_end()); }
  const Trajectory& source() const { return traj_; }

  double s_of_t(double t) const;
  double t_of_s(double s) const;
  /// Position and d/ds velocity; the returned t field holds s.
  PhaseState at(double s) const;

  /// The step-point samples in the new parameter, with energy tag 1/2.
  Trajectory as_trajectory() const;

 private:
  MPSystem sys_;
  double k_;
  Trajectory traj_;
};

/// Throws kQuadrature if 2(k - U) fails to stay positive along the samples.
ArclengthCurve reparametrize(const Trajectory& traj, const MPSystem& sys, double k);

/// integrate() on a magnetic system at energy 1/2. The potential must be
/// identically zero and |v0|_G = 1 within `speed_tol`.
Trajectory magnetic_integrate(const MPSystem& gsys, Vec2 x0, Vec2 v0, Stop stop,
                              const FlowOptions& opts = {}, double speed_tol = 1e-8);

struct ReductionReport {
  /// Max over matched arclength of the G-norm of the chart displacement between
  /// the two curves (G-distance to first order).
  double max_distance = 0.0;
  /// |tau_G - s(tau_MP)|
  double exit_mismatch = 0.0;
  /// max ||d gamma / ds|_G - 1| along the reparametrised MP curve
  double unit_speed_error = 0.0;
  double length = 0.0;
};

/// Compares the reparametrised MP-geodesic from (x0, xi0) with the reduced
/// magnetic geodesic from (x0, xi0 / |xi0|_G). `gsys` must be
/// maupertuis_metric(sys, k).
ReductionReport reduction_deviation(const MPSystem& sys, const MPSystem& gsys, double k, Vec2 x0, Vec2 xi0,
                                    const FlowOptions& opts = {}, int grid = 400);
ReductionReport reduction_deviation(const MPSystem& sys, double k, Vec2 x0, Vec2 xi0,
                                    const FlowOptions& opts = {});

}  // namespace mprig
