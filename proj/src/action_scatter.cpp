#include "mprig/action_scatter.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mprig/parallel.hpp"

namespace mprig {

namespace {

using Gauss = boost::math::quadrature::gauss<double, 10>;

double lagrangian_minus_kinetic_shift(const MPSystem& sys, Vec2 x, Vec2 v) {
  const LocalGeometry lg = sys.local(x);
  return 0.5 * lg.g.quadratic(v, v) - dot(lg.alpha, v) - lg.potential;
}

}  // namespace

double time_free_action(const MPSystem& sys, double k, const Trajectory& curve) {
  const double t_end = curve.t_end();
  double total = k * (t_end - curve.t_begin());
  for (const DenseSegment<6>& seg : curve.segments()) {
    const double a = seg.t0;
    const double b = std::min(seg.t1, t_end);
    if (!(b > a)) continue;
    total += Gauss::integrate(
        [&](double t) {
          const FlowState y = seg(t);
          return lagrangian_minus_kinetic_shift(sys, {y[0], y[1]}, {y[2], y[3]});
        },
        a, b);
  }
  return total;
}

double time_free_action(const MPSystem& sys, double k, const ParametricCurve& curve, int panels) {
  if (panels < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one panel");
  double total = k * curve.duration;
  const double h = curve.duration / panels;
  for (int i = 0; i < panels; ++i) {
    total += Gauss::integrate(
        [&](double t) { return lagrangian_minus_kinetic_shift(sys, curve.position(t), curve.velocity(t)); },
        i * h, (i + 1) * h);
  }
  if (!std::isfinite(total)) throw Error(ErrorCode::kQuadrature, "non-finite action");
  return total;
}

// ---------------------------------------------------------------------------
// Shooting

namespace {

struct Shot {
  Vec2 residual;
  Vec2 end_velocity;
  Trajectory traj;
};

class Shooter {
 public:
  Shooter(const MPSystem& sys, double k, Vec2 x, Vec2 y, const ShootingOptions& opts)
      : sys_(sys), k_(k), x_(x), y_(y), opts_(opts) {
    const double u = sys.potential(x);
    if (!(k > u)) throw Error(ErrorCode::kEnergyLevel, "energy does not exceed U at the boundary point");
    speed_ = std::sqrt(2.0 * (k - u));
  }

  Vec2 direction(double theta) const {
    const Vec2 e{std::cos(theta), std::sin(theta)};
    return (speed_ / norm(sys_, x_, e)) * e;
  }

  Shot shoot(double T, double theta) const {
    Trajectory t = integrate(sys_, x_, direction(theta), k_, Stop::at_time(T, true), opts_.flow);
    const PhaseState& end = t.samples.back();
    return {end.x - y_, end.xi, std::move(t)};
  }

  std::optional<Shot> try_shoot(double T, double theta) const {
    try {
      return shoot(T, theta);
    } catch (const Error&) {
      return std::nullopt;
    }
  }

 private:
  const MPSystem& sys_;
  double k_;
  Vec2 x_;
  Vec2 y_;
  const ShootingOptions& opts_;
  double speed_ = 0.0;
};

}  // namespace

ActionResult boundary_action(const MPSystem& sys, double k, Vec2 x, Vec2 y, const ShootingOptions& opts) {
  const Vec2 chord = y - x;
  if (euclidean_norm(chord) < 1e-14) throw Error(ErrorCode::kInvalidArgument, "boundary points coincide");
  const Shooter shooter(sys, k, x, y, opts);

  double theta = chart_angle(chord);
  double T = euclidean_norm(chord) / euclidean_norm(shooter.direction(theta));
  Shot shot = shooter.shoot(T, theta);
  double res = euclidean_norm(shot.residual);
  int iter = 0;
  for (; iter < opts.max_iterations && res > opts.tolerance; ++iter) {
    const double h = opts.fd_step;
    const Shot plus = shooter.shoot(T, theta + h);
    const Shot minus = shooter.shoot(T, theta - h);
    const Vec2 jt = shot.end_velocity;
    const Vec2 jth = (plus.residual - minus.residual) / (2.0 * h);
    const double det = jt.x * jth.y - jth.x * jt.y;
    if (!(std::abs(det) > 0.0)) break;
    const double dT = -(jth.y * shot.residual.x - jth.x * shot.residual.y) / det;
    const double dth = -(-jt.y * shot.residual.x + jt.x * shot.residual.y) / det;
    bool accepted = false;
    double lambda = 1.0;
    for (; lambda > 1e-9; lambda *= 0.5) {
      const double T1 = T + lambda * dT;
      if (!(T1 > 0.0)) continue;
      auto trial = shooter.try_shoot(T1, theta + lambda * dth);
      if (!trial) continue;
      const double r1 = euclidean_norm(trial->residual);
      if (r1 < res) {
        T = T1;
        theta += lambda * dth;
        shot = std::move(*trial);
        res = r1;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    // damping near the noise floor means further iterations only chase noise
    if (lambda < 1.0 && res <= opts.stall_tolerance) break;
  }
  if (res > opts.tolerance && res > opts.stall_tolerance) {
    std::ostringstream os;
    os << "shooting did not converge after " << iter << " iterations (residual " << res << ")";
    throw Error(ErrorCode::kNoConvergence, os.str());
  }

  ActionResult r;
  r.time = T;
  r.theta = theta;
  r.direction = shooter.direction(theta);
  r.iterations = iter;
  r.residual = res;
  r.value = 2.0 * k * T - shot.traj.alpha_integral(T) - 2.0 * shot.traj.potential_integral(T);

  const Trajectory check = integrate(sys, x, r.direction, k, Stop::exit(), opts.flow);
  r.exit_mismatch = euclidean_norm(check.exit->state.x - y);
  return r;
}

// ---------------------------------------------------------------------------
// Scattering

ScatterRecord scattering(const MPSystem& sys, double k, Vec2 x, Vec2 xi, const FlowOptions& opts) {
  const Trajectory t = integrate(sys, x, xi, k, Stop::exit(), opts);
  const ExitEvent& e = *t.exit;
  return {x, t.samples.front().xi, e.state.x, e.state.xi, e.tau};
}

ScatterRecord scattering_from_magnetic(const MPSystem& sys, double k, const ScatterOracle& magnetic, Vec2 x,
                                       Vec2 xi) {
  const double cx = 2.0 * (k - sys.potential(x));
  const ScatterRecord g = magnetic(x, xi / cx);
  const double cy = 2.0 * (k - sys.potential(g.y));
  return {x, xi, g.y, cy * g.eta, std::nullopt};
}

ScatterRecord magnetic_from_scattering(const MPSystem& sys, double k, const ScatterOracle& mp, Vec2 x, Vec2 v) {
  const double cx = 2.0 * (k - sys.potential(x));
  const ScatterRecord s = mp(x, cx * v);
  const double cy = 2.0 * (k - sys.potential(s.y));
  return {x, v, s.y, s.eta / cy, std::nullopt};
}

// ---------------------------------------------------------------------------
// Boundary recovery

double boundary_limit(const ActionOracle& action, const std::function<Vec2(double)>& curve, int side, double s0,
                      double* residual) {
  const Vec2 x = curve(0.0);
  auto f = [&](double s) { return action(x, curve(side * s)) / s; };
  const double f0 = f(s0);
  const double f1 = f(0.5 * s0);
  const double f2 = f(0.25 * s0);
  const double r1_coarse = 2.0 * f1 - f0;
  const double r1_fine = 2.0 * f2 - f1;
  const double r2 = (4.0 * r1_fine - r1_coarse) / 3.0;
  if (residual) *residual = std::abs(r2 - r1_fine);
  return r2;
}

RecoveredBoundary recover_boundary_data(const ActionOracle& a1, double k1, const ActionOracle& a2, double k2,
                                        const std::function<Vec2(double)>& curve, double s0,
                                        double extrapolation_tol) {
  if (k1 == k2) throw Error(ErrorCode::kInvalidArgument, "two distinct energies are required");
  double res[4];
  const double mp1 = boundary_limit(a1, curve, +1, s0, &res[0]);
  const double mm1 = boundary_limit(a1, curve, -1, s0, &res[1]);
  const double mp2 = boundary_limit(a2, curve, +1, s0, &res[2]);
  const double mm2 = boundary_limit(a2, curve, -1, s0, &res[3]);

  RecoveredBoundary r;
  r.residual = *std::max_element(res, res + 4);
  if (r.residual > extrapolation_tol) {
    std::ostringstream os;
    os << "extrapolation residual " << r.residual << " exceeds " << extrapolation_tol;
    throw Error(ErrorCode::kExtrapolation, os.str());
  }
  r.alpha_xi = 0.5 * (mm1 - mp1);
  r.q1 = 0.5 * (mp1 + mm1);
  r.q2 = 0.5 * (mp2 + mm2);
  const double norm_sq = (r.q2 * r.q2 - r.q1 * r.q1) / (2.0 * (k2 - k1));
  if (!(norm_sq > 0.0)) throw Error(ErrorCode::kExtrapolation, "recovered |xi|^2 is not positive");
  r.norm_xi = std::sqrt(norm_sq);
  r.potential = k1 - r.q1 * r.q1 / (2.0 * norm_sq);
  return r;
}

// ---------------------------------------------------------------------------
// Gauge

MPSystem apply_gauge(const MPSystem& sys, const GaugeTransform& gauge) {
  for (const Expr* e : {&gauge.fx, &gauge.fy, &gauge.phi}) {
    if (!parameters(*e).empty()) throw Error(ErrorCode::kInvalidArgument, "gauge has unbound parameters");
  }
  for (int i = 0; i < 64; ++i) {
    const Vec2 p = boundary_point(sys, 2.0 * std::numbers::pi * i / 64.0);
    const Vec2 fp{evaluate(gauge.fx, p.x, p.y), evaluate(gauge.fy, p.x, p.y)};
    if (euclidean_norm(fp - p) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "gauge map moves boundary points");
    }
    if (std::abs(evaluate(gauge.phi, p.x, p.y)) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "gauge function does not vanish on the boundary");
    }
  }

  // J[a][i] = d_i f^a
  const Expr J[2][2] = {
      {differentiate(gauge.fx, Coord::kX), differentiate(gauge.fx, Coord::kY)},
      {differentiate(gauge.fy, Coord::kX), differentiate(gauge.fy, Coord::kY)},
  };
  const Expr det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
  for (const Vec2& p : domain_samples(sys)) {
    if (!(evaluate(det, p.x, p.y) > 0.0)) {
      std::ostringstream os;
      os << "gauge map Jacobian is not positive at (" << p.x << ", " << p.y << ")";
      throw Error(ErrorCode::kNotInvertible, os.str());
    }
  }

  const SystemExprs& e = sys.exprs();
  auto pull = [&](const Expr& h) { return substitute(h, gauge.fx, gauge.fy); };
  const Expr g[2][2] = {{pull(e.g11), pull(e.g12)}, {pull(e.g12), pull(e.g22)}};
  const Expr a[2] = {pull(e.alpha1), pull(e.alpha2)};
  auto metric = [&](int i, int j) {
    Expr s(0.0);
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) s = s + J[p][i] * J[q][j] * g[p][q];
    return s;
  };
  auto form = [&](int i) {
    return J[0][i] * a[0] + J[1][i] * a[1] + differentiate(gauge.phi, i == 0 ? Coord::kX : Coord::kY);
  };
  SystemExprs out;
  out.g11 = metric(0, 0);
  out.g12 = metric(0, 1);
  out.g22 = metric(1, 1);
  out.alpha1 = form(0);
  out.alpha2 = form(1);
  out.potential = pull(e.potential);
  out.rho = e.rho;
  return MPSystem(sys.name() + "/gauge", std::move(out));
}

// ---------------------------------------------------------------------------
// Tables

std::vector<ActionRow> action_table(const MPSystem& sys, double k, int n, const ShootingOptions& opts) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two boundary points");
  std::vector<double> angles(n);
  std::vector<Vec2> points(n);
  for (int i = 0; i < n; ++i) {
    angles[i] = 2.0 * std::numbers::pi * i / n;
    points[i] = boundary_point(sys, angles[i]);
  }
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);
  std::vector<ActionRow> rows(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    rows[p] = {k, angles[i], angles[j], boundary_action(sys, k, points[i], points[j], opts)};
  });
  return rows;
}

std::vector<ScatterRow> scatter_table(const MPSystem& sys, double k, int n_points, int n_dirs,
                                      const FlowOptions& opts) {
  std::vector<ScatterRow> rows(static_cast<std::size_t>(n_points) * n_dirs);
  parallel_for(rows.size(), [&](std::size_t idx) {
    const int i = static_cast<int>(idx) / n_dirs;
    const int j = static_cast<int>(idx) % n_dirs;
    const double angle = 2.0 * std::numbers::pi * i / n_points;
    const double psi = -0.5 * std::numbers::pi + std::numbers::pi * (j + 0.5) / n_dirs;
    const BoundaryStart s = inward_start(sys, k, angle, psi);
    rows[idx] = {k, angle, psi, scattering(sys, k, s.x, s.xi, opts)};
  });
  return rows;
}

void write_action_csv(std::ostream& os, const std::vector<ActionRow>& rows) {
  os << "k,x_angle,y_angle,A,T,theta0,iters\n";
  char line[256];
  for (const ActionRow& r : rows) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.k, r.x_angle, r.y_angle,
                  r.result.value, r.result.time, r.result.theta, r.result.iterations);
    os << line;
  }
}

void write_scatter_csv(std::ostream& os, const std::vector<ScatterRow>& rows) {
  os << "k,x_angle,xi_angle,y_angle,eta_angle,tau\n";
  char line[256];
  for (const ScatterRow& r : rows) {
    const ScatterRecord& s = r.record;
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,", r.k, r.x_angle, chart_angle(s.xi),
                  chart_angle(s.y), chart_angle(s.eta));
    os << line;
    if (s.tau) {
      std::snprintf(line, sizeof line, "%.17g", *s.tau);
      os << line;
    }
    os << '\n';
  }
}

}  // namespace mprig
