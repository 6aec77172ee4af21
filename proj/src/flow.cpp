#include "mprig/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "detail/roots.hpp"

namespace mprig {

namespace {

Vec2 position(const FlowState& y) { return {y[0], y[1]}; }
Vec2 velocity(const FlowState& y) { return {y[2], y[3]}; }

PhaseState to_phase(const FlowState& y, double t) { return {position(y), velocity(y), t}; }

}  // namespace

// ---------------------------------------------------------------------------
// Trajectory

FlowState Trajectory::raw_state_at(double t) const {
  if (segments_.empty()) {
    if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "empty trajectory");
    const PhaseState& s = samples.front();
    return {s.x.x, s.x.y, s.xi.x, s.xi.y, 0.0, 0.0};
  }
  if (end_state_ && t >= t_end()) return *end_state_;
  t = std::clamp(t, t_begin(), t_end());
  auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                             [](const DenseSegment<6>& s, double v) { return s.t1 < v; });
  if (it == segments_.end()) it = std::prev(segments_.end());
  return (*it)(t);
}

PhaseState Trajectory::state_at(double t) const {
  const FlowState y = raw_state_at(t);
  return to_phase(y, t);
}

void Trajectory::write_csv(std::ostream& os, const MPSystem& sys) const {
  os << "t,x,y,xi1,xi2,energy\n";
  char line[256];
  for (const PhaseState& s : samples) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.x.x, s.x.y,
                  s.xi.x, s.xi.y, energy(sys, s.x, s.xi));
    os << line;
  }
}

// ---------------------------------------------------------------------------
// Right-hand side

MotionRates mp_rhs(const MPSystem& sys, const PhaseState& s) {
  const LocalGeometry lg = sys.local(s.x);
  const Christoffel c = christoffel(lg);
  const Vec2 acc = -c.contract(s.xi, s.xi) + lorentz_force(lg, s.xi) - lg.ginv * lg.dpotential;
  return {s.xi, acc};
}

FlowState flow_rhs(const MPSystem& sys, const FlowState& y) {
  const Vec2 v = velocity(y);
  const LocalGeometry lg = sys.local(position(y));
  const Christoffel c = christoffel(lg);
  const Vec2 acc = -c.contract(v, v) + lorentz_force(lg, v) - lg.ginv * lg.dpotential;
  return {v.x, v.y, acc.x, acc.y, lg.potential, dot(lg.alpha, v)};
}

double hessian_rho_hat(const MPSystem& sys, Vec2 x, Vec2 v) {
  const BoundaryJet j = sys.boundary_jet(x);
  const Christoffel c = christoffel(sys, x);
  double h = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) {
      const double cov = j.d2rho_hat(i, k) - c(0, i, k) * j.drho_hat[0] - c(1, i, k) * j.drho_hat[1];
      h += cov * v[i] * v[k];
    }
  }
  return h;
}

ExitModel exit_model(const MPSystem& sys, Vec2 x, Vec2 xi) {
  const Vec2 nu = boundary_normal(sys, x);
  const LocalGeometry lg = sys.local(x);
  const Vec2 force = lorentz_force(lg, xi) - lg.ginv * lg.dpotential;
  return {lg.g.quadratic(nu, xi), hessian_rho_hat(sys, x, xi) + lg.g.quadratic(nu, force)};
}

// ---------------------------------------------------------------------------
// Integration

namespace {

struct Start {
  Vec2 x;
  Vec2 xi;
  double scale = 1.0;
  double rho = 0.0;
  bool on_boundary = false;
};

Start prepare_start(const MPSystem& sys, Vec2 x0, Vec2 xi0, double k, const Stop& stop,
                    const FlowOptions& opts) {
  if (!std::isfinite(k)) throw Error(ErrorCode::kInvalidArgument, "energy must be finite");
  const LocalGeometry lg = sys.local(x0);
  if (!(k > lg.potential)) {
    std::ostringstream os;
    os << "energy k=" << k << " does not exceed U=" << lg.potential << " at the start point";
    throw Error(ErrorCode::kEnergyLevel, os.str());
  }
  const double n = std::sqrt(lg.g.quadratic(xi0, xi0));
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::kInvalidArgument, "zero initial velocity");
  Start s;
  s.x = x0;
  s.scale = std::sqrt(2.0 * (k - lg.potential)) / n;
  s.xi = s.scale * xi0;
  s.rho = sys.rho(x0);
  s.on_boundary = std::abs(s.rho) <= opts.boundary_tol;
  const bool exterior_ok = stop.kind == Stop::Kind::kTime && stop.allow_exterior;
  if (s.rho < -opts.boundary_tol && !exterior_ok) {
    throw Error(ErrorCode::kInvalidArgument, "start point lies outside the domain");
  }
  if (s.on_boundary && stop.kind == Stop::Kind::kExit) {
    const Vec2 nu = boundary_normal(sys, x0, opts.boundary_tol);
    const double speed = std::sqrt(2.0 * (k - lg.potential));
    if (lg.g.quadratic(nu, s.xi) < -1e-12 * speed) {
      throw Error(ErrorCode::kNotTangent, "boundary start velocity points outward");
    }
  }
  return s;
}

class EnergyMonitor {
 public:
  EnergyMonitor(const MPSystem& sys, double k, double tol) : sys_(sys), k_(k), limit_(tol * std::max(1.0, k)) {}

  double check(const FlowState& y, double t) {
    const double e = std::abs(energy(sys_, position(y), velocity(y)) - k_);
    if (e > limit_) {
      std::ostringstream os;
      os << "energy drift " << e << " at t=" << t;
      throw Error(ErrorCode::kEnergyDrift, os.str());
    }
    return e;
  }

 private:
  const MPSystem& sys_;
  double k_;
  double limit_;
};

// Locates the outward crossing inside seg and polishes it on a fresh step.
// from_boundary marks a segment starting on the boundary itself.
std::pair<double, FlowState> locate_exit(const MPSystem& sys, const DenseSegment<6>& seg, double r_begin,
                                         double r_end, bool from_boundary, const FlowOptions& opts) {
  auto r_at = [&](double t) { return sys.rho(position(seg(t))); };
  const double ta = seg.t0;
  const double tb = seg.t1;
  double tau;
  if (!from_boundary) {
    tau = detail::bracketed_root(r_at, ta, tb, r_begin, r_end);
  } else {
    // Difference quotient of rho; positive just after an inward start.
    auto q = [&](double t) { return (r_at(t) - r_begin) / (t - ta); };
    const double qb = (r_end - r_begin) / (tb - ta);
    double tl = ta + 0.5 * (tb - ta);
    double ql = q(tl);
    for (int i = 0; i < 80 && !(ql > 0.0); ++i) {
      tl = ta + 0.5 * (tl - ta);
      ql = q(tl);
    }
    if (!(ql > 0.0)) return {ta, seg.y0};
    if (!(qb < 0.0)) {
      tau = tb;
    } else {
      tau = detail::bracketed_root(q, tl, tb, ql, qb);
    }
  }

  const auto rhs = [&sys](double, const FlowState& y) { return flow_rhs(sys, y); };
  FlowState best = seg(tau);
  double best_r = std::abs(sys.rho(position(best)));
  double best_tau = tau;
  for (int iter = 0; iter < 8 && best_r > 1e-3 * opts.exit_tol; ++iter) {
    const double h = tau - ta;
    const FlowState y = h > 0.0 ? Dop853<6>::single_step(rhs, ta, seg.y0, h) : seg.y0;
    const double r = sys.rho(position(y));
    if (std::abs(r) < best_r || iter == 0) {
      best = y;
      best_r = std::abs(r);
      best_tau = tau;
    }
    const double rdot = dot(sys.rho_differential(position(y)), velocity(y));
    if (!(rdot < 0.0)) break;
    const double next = tau - r / rdot;
    if (!(next >= ta) || next > tb + (tb - ta)) break;
    if (next == tau) break;
    tau = next;
  }
  return {best_tau, best};
}

}  // namespace

Trajectory integrate(const MPSystem& sys, Vec2 x0, Vec2 xi0, double k, Stop stop, const FlowOptions& opts) {
  const Start start = prepare_start(sys, x0, xi0, k, stop, opts);
  Trajectory traj;
  traj.energy_tag = k;
  traj.velocity_scale = start.scale;
  traj.samples.push_back({start.x, start.xi, 0.0});
  const FlowState y0 = {start.x.x, start.x.y, start.xi.x, start.xi.y, 0.0, 0.0};

  const bool to_exit = stop.kind == Stop::Kind::kExit;
  const double bound = to_exit ? opts.max_time : stop.time;
  if (!(bound >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative stop time");

  // Near-tangent boundary starts: the quadratic exit model seeds the first
  // bracket.
  double phase_bound = bound;
  if (to_exit && start.on_boundary) {
    const ExitModel m = exit_model(sys, start.x, start.xi);
    const double speed = std::sqrt(2.0 * (k - sys.potential(start.x)));
    if (m.a < opts.tangent_threshold * speed && m.b < 0.0) {
      if (m.a <= 1e-15 * speed) {
        traj.exit = ExitEvent{0.0, traj.samples.front()};
        traj.set_end_state(y0);
        return traj;
      }
      phase_bound = std::min(bound, -4.0 * m.a / m.b);
    }
  }
  if (bound == 0.0) return traj;

  EnergyMonitor monitor(sys, k, opts.energy_tol);
  Dop853Options dopts;
  dopts.rtol = opts.rtol;
  dopts.atol = opts.atol;
  if (phase_bound < bound) dopts.initial_step = 0.25 * phase_bound;
  Dop853<6> solver([&sys](double, const FlowState& y) { return flow_rhs(sys, y); }, 0.0, y0, dopts);

  double r_prev = start.rho;
  bool first = true;
  while (solver.t() < bound) {
    solver.step(solver.t() < phase_bound ? phase_bound : bound);
    const DenseSegment<6> seg = solver.dense();
    traj.add_segment(seg);
    const FlowState& y = solver.y();
    traj.max_energy_error = std::max(traj.max_energy_error, monitor.check(y, solver.t()));
    const double r = sys.rho(position(y));

    if (to_exit && r < 0.0) {
      const bool from_boundary = first && start.on_boundary;
      const auto [tau, ye] = locate_exit(sys, seg, r_prev, r, from_boundary, opts);
      traj.max_energy_error = std::max(traj.max_energy_error, monitor.check(ye, tau));
      const PhaseState exit_state = to_phase(ye, tau);
      if (tau > traj.samples.back().t) {
        traj.samples.push_back(exit_state);
      } else {
        traj.samples.back() = exit_state;
      }
      traj.set_end_state(ye);
      traj.exit = ExitEvent{tau, exit_state};
      return traj;
    }
    if (!to_exit && !stop.allow_exterior && r < -opts.boundary_tol) {
      std::ostringstream os;
      os << "trajectory left the domain at t=" << solver.t();
      throw Error(ErrorCode::kLeftDomain, os.str());
    }
    traj.samples.push_back(to_phase(y, solver.t()));
    r_prev = r;
    first = false;
  }
  if (to_exit) {
    std::ostringstream os;
    os << "no exit before t=" << opts.max_time;
    throw Error(ErrorCode::kNoExit, os.str());
  }
  traj.set_end_state(solver.y());
  return traj;
}

double exit_time(const MPSystem& sys, Vec2 x, Vec2 xi, double k, const FlowOptions& opts) {
  const Trajectory t = integrate(sys, x, xi, k, Stop::exit(), opts);
  return t.exit->tau;
}

Vec2 mp_exp(const MPSystem& sys, Vec2 x, double k, double t, Vec2 xi, const FlowOptions& opts) {
  if (t < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative time");
  if (t == 0.0) return x;
  const Trajectory traj = integrate(sys, x, xi, k, Stop::at_time(t), opts);
  return traj.samples.back().x;
}

}  // namespace mprig
