#include "mprig/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "detail/roots.hpp"

namespace mprig {

ArclengthCurve::ArclengthCurve(const MPSystem& sys, double k, Trajectory traj)
    : sys_(sys), k_(k), traj_(std::move(traj)) {}

double ArclengthCurve::s_of_t(double t) const {
  return 2.0 * k_ * t - 2.0 * traj_.potential_integral(t);
}

double ArclengthCurve::t_of_s(double s) const {
  const double t0 = traj_.t_begin();
  const double t1 = traj_.t_end();
  if (s <= 0.0) return t0;
  const double total = s_of_t(t1);
  if (s >= total) return t1;
  auto f = [&](double t) { return s_of_t(t) - s; };
  return detail::bracketed_root(f, t0, t1, -s, total - s);
}

PhaseState ArclengthCurve::at(double s) const {
  const double t = t_of_s(s);
  const PhaseState p = traj_.state_at(t);
  const double rate = 2.0 * (k_ - sys_.potential(p.x));
  return {p.x, p.xi / rate, s};
}

Trajectory ArclengthCurve::as_trajectory() const {
  Trajectory out;
  out.energy_tag = 0.5;
  for (const PhaseState& p : traj_.samples) {
    const double rate = 2.0 * (k_ - sys_.potential(p.x));
    out.samples.push_back({p.x, p.xi / rate, s_of_t(p.t)});
  }
  if (traj_.exit) {
    const PhaseState& e = traj_.exit->state;
    const double rate = 2.0 * (k_ - sys_.potential(e.x));
    const double s = s_of_t(traj_.exit->tau);
    out.exit = ExitEvent{s, {e.x, e.xi / rate, s}};
  }
  return out;
}

ArclengthCurve reparametrize(const Trajectory& traj, const MPSystem& sys, double k) {
  if (std::abs(traj.energy_tag - k) > 1e-12 * std::max(1.0, std::abs(k))) {
    throw Error(ErrorCode::kInvalidArgument, "trajectory energy tag differs from k");
  }
  double prev = -1.0;
  for (const PhaseState& p : traj.samples) {
    const double rate = 2.0 * (k - sys.potential(p.x));
    if (!(rate > 0.0)) {
      std::ostringstream os;
      os << "time change rate 2(k-U)=" << rate << " is not positive at t=" << p.t;
      throw Error(ErrorCode::kQuadrature, os.str());
    }
    const double s = 2.0 * k * p.t - 2.0 * traj.potential_integral(p.t);
    if (!(s > prev) && p.t > 0.0) throw Error(ErrorCode::kQuadrature, "arclength is not increasing");
    prev = s;
  }
  return ArclengthCurve(sys, k, traj);
}

Trajectory magnetic_integrate(const MPSystem& gsys, Vec2 x0, Vec2 v0, Stop stop, const FlowOptions& opts,
                              double speed_tol) {
  const Expr& u = gsys.exprs().potential;
  if (!u.is_constant(0.0)) throw Error(ErrorCode::kInvalidArgument, "magnetic system must have U = 0");
  const double speed = norm(gsys, x0, v0);
  if (std::abs(speed - 1.0) > speed_tol) {
    std::ostringstream os;
    os << "initial velocity has G-norm " << speed << ", expected 1";
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
  return integrate(gsys, x0, v0, 0.5, stop, opts);
}

ReductionReport reduction_deviation(const MPSystem& sys, const MPSystem& gsys, double k, Vec2 x0, Vec2 xi0,
                                    const FlowOptions& opts, int grid) {
  const Trajectory mp = integrate(sys, x0, xi0, k, Stop::exit(), opts);
  const ArclengthCurve curve = reparametrize(mp, sys, k);
  const Vec2 xi = mp.samples.front().xi;
  const Vec2 v0 = xi / norm(gsys, x0, xi);
  const Trajectory mag = magnetic_integrate(gsys, x0, v0, Stop::exit(), opts);

  ReductionReport r;
  r.length = curve.length();
  r.exit_mismatch = std::abs(mag.exit->tau - r.length);

  const double common = std::min(r.length, mag.exit->tau);
  for (int i = 0; i <= grid; ++i) {
    const double s = common * i / grid;
    const PhaseState a = curve.at(s);
    const PhaseState b = mag.state_at(s);
    const Vec2 mid = 0.5 * (a.x + b.x);
    const Vec2 d = a.x - b.x;
    const Sym2 G = gsys.metric(mid);
    r.max_distance = std::max(r.max_distance, std::sqrt(G.quadratic(d, d)));
    r.unit_speed_error = std::max(r.unit_speed_error, std::abs(norm(gsys, a.x, a.xi) - 1.0));
  }
  return r;
}

ReductionReport reduction_deviation(const MPSystem& sys, double k, Vec2 x0, Vec2 xi0, const FlowOptions& opts) {
  return reduction_deviation(sys, maupertuis_metric(sys, k), k, x0, xi0, opts);
}

}  // namespace mprig
