#include "mprig/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "mprig/action_scatter.hpp"
#include "mprig/convexity.hpp"
#include "mprig/parallel.hpp"
#include "mprig/reduction.hpp"

namespace mprig {

// --- reports -------------------------------------------------------------------

bool Report::passed() const {
  return std::all_of(metrics.begin(), metrics.end(), [](const Metric& m) { return m.pass; });
}

const Metric* Report::find(std::string_view name) const {
  for (const Metric& m : metrics) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

std::string Report::summary() const {
  std::ostringstream os;
  char line[512];
  os << "# experiment: " << experiment << "\n# scenario: " << scenario << "\n# seed: " << seed << "\n";
  for (const auto& [key, value] : settings) {
    std::snprintf(line, sizeof line, "# %s: %.17g\n", key.c_str(), value);
    os << line;
  }
  for (const Metric& m : metrics) {
    if (m.relation == "info") {
      std::snprintf(line, sizeof line, "%-36s %14.6e                    info\n", m.name.c_str(), m.value);
    } else {
      std::snprintf(line, sizeof line, "%-36s %14.6e %2s %14.6e  %s\n", m.name.c_str(), m.value,
                    m.relation.c_str(), m.threshold, m.pass ? "PASS" : "FAIL");
    }
    os << line;
  }
  for (const std::string& n : notes) os << "note: " << n << "\n";
  os << "result: " << (passed() ? "PASS" : "FAIL") << "\n";
  return os.str();
}

void Report::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  auto put = [&](const std::string& file, const std::string& text) {
    std::ofstream out(dir / file, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / file).string());
  };
  put("summary.txt", summary());
  for (const Table& t : tables) put(t.file, t.csv);
}

// --- shared machinery ----------------------------------------------------------

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Context {
 public:
  Context(const Scenario& s, const RunOptions& o, Report& r)
      : scenario(s), opts(o), report(r), rng(o.seed.value_or(s.sampling.seed)),
        k(o.k.value_or(s.energies.front())) {
    report.seed = o.seed.value_or(s.sampling.seed);
  }

  int samples(int fallback) const { return opts.samples.value_or(fallback); }

  void bound(const std::string& name, double value, const char* relation, double threshold) {
    const double t = scenario.tolerance(name, threshold);
    const bool pass = std::string_view(relation) == "<=" ? value <= t : value >= t;
    report.metrics.push_back({name, value, relation, t, pass});
  }
  void info(const std::string& name, double value) { report.metrics.push_back({name, value, "info", 0.0, true}); }

  /// Random boundary phase points, drawn serially before any parallel work.
  std::vector<std::pair<double, double>> random_starts(int n) {
    std::uniform_real_distribution<double> angle(0.0, kTwoPi), psi(-1.4, 1.4);
    std::vector<std::pair<double, double>> out(n);
    for (auto& p : out) {
      p.first = angle(rng);
      p.second = psi(rng);
    }
    return out;
  }

  /// Random pairs of boundary angles at least `gap` apart on the circle.
  std::vector<std::pair<double, double>> random_pairs(int n, double gap = 0.1) {
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    std::vector<std::pair<double, double>> out;
    while (static_cast<int>(out.size()) < n) {
      const double a = angle(rng), b = angle(rng);
      if (std::abs(std::remainder(a - b, kTwoPi)) >= gap) out.emplace_back(a, b);
    }
    return out;
  }

  void table(std::string file, std::string csv) { report.tables.push_back({std::move(file), std::move(csv)}); }

  const Scenario& scenario;
  const RunOptions& opts;
  Report& report;
  std::mt19937_64 rng;
  double k;
};

const MPSystem& second_primary(const Scenario& s, const char* experiment) {
  if (s.primaries().size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(experiment) + " needs a scenario with two primary systems");
  }
  return s.primaries()[1];
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// --- 1. energy ---------------------------------------------------------------------

void energy_conservation(Context& c) {
  const int n = c.samples(c.scenario.sampling.trajectories);
  std::ostringstream csv;
  csv << "system,sample,x_angle,psi,tau,max_rel_energy_error\n";
  // The collar scenario needs this to stay within 1e-8 between step points.
  FlowOptions flow;
  flow.rtol = flow.atol = 1e-12;
  double worst = 0.0;
  for (const MPSystem& sys : c.scenario.primaries()) {
    const auto starts = c.random_starts(n);
    std::vector<double> err(n), tau(n);
    parallel_for(n, [&](std::size_t i) {
      const BoundaryStart s = inward_start(sys, c.k, starts[i].first, starts[i].second);
      const Trajectory t = integrate(sys, s.x, s.xi, c.k, Stop::exit(), flow);
      double e = 0.0;
      auto probe = [&](const PhaseState& p) { e = std::max(e, std::abs(energy(sys, p.x, p.xi) - c.k) / c.k); };
      for (const PhaseState& p : t.samples) probe(p);
      for (const DenseSegment<6>& seg : t.segments()) {
        for (int j = 1; j < 8; ++j) {
          const double ts = seg.t0 + (seg.t1 - seg.t0) * j / 8.0;
          if (ts < t.t_end()) probe(t.state_at(ts));
        }
      }
      probe(t.exit->state);
      err[i] = e;
      tau[i] = t.exit->tau;
    });
    for (int i = 0; i < n; ++i) {
      csv << fmt("%s,%d,%.17g,%.17g,%.17g,%.6e\n", sys.name().c_str(), i, starts[i].first, starts[i].second, tau[i],
                 err[i]);
    }
    worst = std::max(worst, max_abs(err));
  }
  c.bound("max_relative_energy_error", worst, "<=", 1e-8);
  c.table("energy.csv", csv.str());
}

// --- 2. reduction-check ------------------------------------------------------------

void reduction_check(Context& c) {
  const int n = c.samples(50);
  std::ostringstream csv;
  csv << "system,sample,max_distance,exit_mismatch,unit_speed_error,length\n";
  double dist = 0.0, mismatch = 0.0, speed = 0.0;
  for (const MPSystem& sys : c.scenario.primaries()) {
    const MPSystem G = maupertuis_metric(sys, c.k);
    const auto starts = c.random_starts(n);
    std::vector<ReductionReport> rows(n);
    parallel_for(n, [&](std::size_t i) {
      const BoundaryStart s = inward_start(sys, c.k, starts[i].first, starts[i].second);
      rows[i] = reduction_deviation(sys, G, c.k, s.x, s.xi);
    });
    for (int i = 0; i < n; ++i) {
      const ReductionReport& r = rows[i];
      csv << fmt("%s,%d,%.6e,%.6e,%.6e,%.17g\n", sys.name().c_str(), i, r.max_distance, r.exit_mismatch,
                 r.unit_speed_error, r.length);
      dist = std::max(dist, r.max_distance);
      mismatch = std::max(mismatch, r.exit_mismatch);
      speed = std::max(speed, r.unit_speed_error);
    }
  }
  c.bound("max_reduction_distance", dist, "<=", 1e-6);
  c.info("max_exit_length_mismatch", mismatch);
  c.info("max_unit_speed_error", speed);
  c.table("reduction.csv", csv.str());
}

// --- 3. action-reduced ---------------------------------------------------------------

void action_reduced(Context& c) {
  const int n = c.samples(20);
  std::ostringstream csv;
  csv << "system,x_angle,y_angle,A,A_G,difference\n";
  double worst = 0.0;
  for (const MPSystem& sys : c.scenario.primaries()) {
    const MPSystem G = maupertuis_metric(sys, c.k);
    const auto pairs = c.random_pairs(n);
    std::vector<double> a(n), ag(n);
    parallel_for(n, [&](std::size_t i) {
      const Vec2 x = boundary_point(sys, pairs[i].first), y = boundary_point(sys, pairs[i].second);
      a[i] = boundary_action(sys, c.k, x, y).value;
      ag[i] = boundary_action(G, 0.5, x, y).value;
    });
    for (int i = 0; i < n; ++i) {
      csv << fmt("%s,%.17g,%.17g,%.17g,%.17g,%.6e\n", sys.name().c_str(), pairs[i].first, pairs[i].second, a[i],
                 ag[i], a[i] - ag[i]);
      worst = std::max(worst, std::abs(a[i] - ag[i]));
    }
  }
  c.bound("max_action_reduced_gap", worst, "<=", 1e-6);
  c.table("action_reduced.csv", csv.str());
}

// --- 4/5. action-match -----------------------------------------------------------------

void action_match(Context& c) {
  const MPSystem& s1 = c.scenario.primaries()[0];
  const MPSystem& s2 = second_primary(c.scenario, "action-match");
  const int n = c.samples(c.scenario.sampling.pairs);
  const auto t1 = action_table(s1, c.k, n);
  const auto t2 = action_table(s2, c.k, n);
  double gap = 0.0;
  for (std::size_t i = 0; i < t1.size(); ++i) gap = std::max(gap, std::abs(t1[i].result.value - t2[i].result.value));
  c.bound("max_action_gap", gap, "<=", 1e-6);
  c.info("pairs", static_cast<double>(t1.size()));

  std::ostringstream a, b;
  write_action_csv(a, t1);
  write_action_csv(b, t2);
  c.table("actions_" + s1.name() + ".csv", a.str());
  c.table("actions_" + s2.name() + ".csv", b.str());

  if (const MPSystem* ref = c.scenario.reference()) {
    const auto tr = action_table(*ref, 0.5, n);
    double rgap = 0.0;
    for (std::size_t i = 0; i < t1.size(); ++i) rgap = std::max(rgap, std::abs(t1[i].result.value - tr[i].result.value));
    c.info("max_gap_to_reference_magnetic_action", rgap);
  }

  double sup = 0.0;
  for (const Vec2& p : domain_samples(s1)) sup = std::max(sup, std::abs(s1.potential(p) - s2.potential(p)));
  c.info("sup_potential_difference", sup);
}

// --- 5. boundary-traces ------------------------------------------------------------------

void boundary_traces(Context& c) {
  const MPSystem& s1 = c.scenario.primaries()[0];
  const MPSystem& s2 = second_primary(c.scenario, "boundary-traces");
  const int n = c.samples(c.scenario.sampling.boundary);
  std::ostringstream csv;
  csv << "angle,metric_gap,potential_gap\n";
  double mgap = 0.0, ugap = 0.0, trace = 0.0;
  for (int i = 0; i < n; ++i) {
    const double angle = kTwoPi * i / n;
    const Vec2 p = boundary_point(s1, angle);
    const Sym2 g1 = s1.metric(p), g2 = s2.metric(p);
    const double dm = std::max({std::abs(g1.a11 - g2.a11), std::abs(g1.a12 - g2.a12), std::abs(g1.a22 - g2.a22)});
    const double du = std::abs(s1.potential(p) - s2.potential(p));
    csv << fmt("%.17g,%.6e,%.6e\n", angle, dm, du);
    mgap = std::max(mgap, dm);
    ugap = std::max(ugap, du);
    trace += s1.potential(p) / n;
  }
  c.bound("max_metric_trace_gap", mgap, "<=", 1e-9);
  c.bound("max_potential_trace_gap", ugap, "<=", 1e-9);
  c.info("boundary_potential", trace);

  // interior witness: U1 < boundary value < U2 (or the reverse)
  int witnesses = 0;
  bool noted = false;
  for (const Vec2& p : domain_samples(s1, 24, 48)) {
    if (s1.rho(p) < 1e-3) continue;
    const double u1 = s1.potential(p), u2 = s2.potential(p);
    if ((u1 < trace && trace < u2) || (u2 < trace && trace < u1)) {
      ++witnesses;
      if (!noted) {
        c.report.notes.push_back(fmt("witness at (%.4f, %.4f): U1 = %.6f, U2 = %.6f, boundary value %.6f", p.x, p.y,
                                     u1, u2, trace));
        noted = true;
      }
    }
  }
  c.bound("interior_witnesses", witnesses, ">=", 1);
  c.table("traces.csv", csv.str());
}

// --- 6. scattering-conversion -------------------------------------------------------------

void scattering_conversion(Context& c) {
  const int n = c.samples(50);
  std::ostringstream csv;
  csv << "system,sample,forward_gap,inverse_gap,roundtrip_error\n";
  double fwd = 0.0, inv = 0.0, round = 0.0;
  for (const MPSystem& sys : c.scenario.primaries()) {
    const MPSystem G = maupertuis_metric(sys, c.k);
    const ScatterOracle mp = [&](Vec2 x, Vec2 xi) { return scattering(sys, c.k, x, xi); };
    const ScatterOracle mag = [&](Vec2 x, Vec2 v) { return scattering(G, 0.5, x, v); };
    const auto starts = c.random_starts(n);
    std::vector<ScatterRecord> direct(n);
    std::vector<double> f(n), b(n), r(n);
    parallel_for(n, [&](std::size_t i) {
      const BoundaryStart s = inward_start(sys, c.k, starts[i].first, starts[i].second);
      direct[i] = mp(s.x, s.xi);
      const ScatterRecord via = scattering_from_magnetic(sys, c.k, mag, s.x, s.xi);
      f[i] = std::max(euclidean_norm(direct[i].y - via.y), euclidean_norm(direct[i].eta - via.eta));

      const double cx = 2.0 * (c.k - sys.potential(s.x));
      const Vec2 v = s.xi / cx;
      const ScatterRecord ref = mag(s.x, v);
      const ScatterRecord back = magnetic_from_scattering(sys, c.k, mp, s.x, v);
      b[i] = std::max(euclidean_norm(ref.y - back.y), euclidean_norm(ref.eta - back.eta));

      // both conversion formulas on exact data, composed
      Vec2 received;
      const ScatterOracle exact_mag = [&](Vec2, Vec2 w) {
        received = w;
        return ref;
      };
      const ScatterRecord up = scattering_from_magnetic(sys, c.k, exact_mag, s.x, s.xi);
      const ScatterOracle exact_mp = [&](Vec2, Vec2) { return up; };
      const ScatterRecord down = magnetic_from_scattering(sys, c.k, exact_mp, s.x, v);
      r[i] = std::max(euclidean_norm(received - v) / euclidean_norm(v),
                      euclidean_norm(down.eta - ref.eta) / euclidean_norm(ref.eta));
    });
    std::vector<ScatterRow> rows(n);
    for (int i = 0; i < n; ++i) {
      rows[i] = {c.k, starts[i].first, starts[i].second, direct[i]};
      csv << fmt("%s,%d,%.6e,%.6e,%.6e\n", sys.name().c_str(), i, f[i], b[i], r[i]);
    }
    fwd = std::max(fwd, max_abs(f));
    inv = std::max(inv, max_abs(b));
    round = std::max(round, max_abs(r));
    std::ostringstream table;
    write_scatter_csv(table, rows);
    c.table("scatter_" + sys.name() + ".csv", table.str());
  }
  c.bound("max_conversion_gap", fwd, "<=", 1e-6);
  c.bound("max_inverse_conversion_gap", inv, "<=", 1e-6);
  c.bound("max_roundtrip_error", round, "<=", 1e-9);
  c.table("conversion.csv", csv.str());
}

// --- 7. boundary-recovery ---------------------------------------------------------------

double second_energy(const Scenario& s, const RunOptions& o, double k1) {
  if (o.k2) return *o.k2;
  if (!o.k && s.energies.size() > 1) return s.energies[1];
  return k1 + 1.0;
}

void boundary_recovery(Context& c) {
  const double k1 = c.k;
  const double k2 = second_energy(c.scenario, c.opts, k1);
  c.report.settings.emplace_back("k2", k2);
  const int n = c.samples(16);
  const double s0 = c.scenario.tolerance("recovery_step", 2e-2);
  std::ostringstream csv;
  csv << "system,angle,U,U_recovered,norm,norm_recovered,alpha,alpha_recovered,q1,q2,residual\n";
  double eu = 0.0, en = 0.0, ea = 0.0;
  std::vector<std::vector<double>> q_profiles;
  for (const MPSystem& sys : c.scenario.primaries()) {
    auto oracle = [&sys](double k) -> ActionOracle {
      return [&sys, k](Vec2 x, Vec2 y) { return boundary_action(sys, k, x, y).value; };
    };
    std::vector<RecoveredBoundary> rec(n);
    parallel_for(n, [&](std::size_t i) {
      const double angle = kTwoPi * i / n;
      auto curve = [&sys, angle](double s) { return boundary_point(sys, angle + s); };
      rec[i] = recover_boundary_data(oracle(k1), k1, oracle(k2), k2, curve, s0);
    });
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) {
      const double angle = kTwoPi * i / n;
      const Vec2 x = boundary_point(sys, angle);
      const Vec2 xi = boundary_tangent(sys, angle);
      const double u = sys.potential(x), nx = norm(sys, x, xi), ax = dot(sys.alpha(x), xi);
      const RecoveredBoundary& r = rec[i];
      eu = std::max(eu, std::abs(r.potential - u));
      en = std::max(en, std::abs(r.norm_xi - nx));
      ea = std::max(ea, std::abs(r.alpha_xi - ax));
      q[i] = r.q1;
      csv << fmt("%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3e\n", sys.name().c_str(), angle, u,
                 r.potential, nx, r.norm_xi, ax, r.alpha_xi, r.q1, r.q2, r.residual);
    }
    q_profiles.push_back(std::move(q));
  }
  c.bound("max_potential_error", eu, "<=", 1e-3);
  c.bound("max_norm_error", en, "<=", 1e-3);
  c.bound("max_alpha_error", ea, "<=", 1e-3);
  if (q_profiles.size() >= 2) {
    double gap = 0.0;
    for (int i = 0; i < n; ++i) gap = std::max(gap, std::abs(q_profiles[0][i] - q_profiles[1][i]));
    c.bound("single_energy_profile_gap", gap, "<=", 1e-6);
  }
  c.table("recovery.csv", csv.str());
}

// --- 8. gauge ----------------------------------------------------------------------------

void gauge(Context& c) {
  const int n = c.samples(8);
  const int dirs = 4;
  std::uniform_real_distribution<double> coef(-0.5, 0.5);
  struct Named {
    std::string name;
    GaugeTransform t;
  };
  std::vector<Named> transforms;
  const Expr x = Expr::var(Coord::kX), y = Expr::var(Coord::kY);
  for (int j = 0; j < 3; ++j) {
    const double a = coef(c.rng), b = coef(c.rng), d = coef(c.rng), e = coef(c.rng);
    GaugeTransform t;
    t.phi = c.scenario.primaries()[0].exprs().rho * (Expr(a) + Expr(b) * x + Expr(d) * y + Expr(e) * x * y);
    transforms.push_back({"phi" + std::to_string(j + 1), t});
    c.report.notes.push_back(fmt("phi%d = rho * (%.6f + %.6f x + %.6f y + %.6f xy)", j + 1, a, b, d, e));
  }
  {
    // radial bump, identity for |x|^2 >= 0.6
    const Expr bump = Expr(1.0) + Expr(0.1) * smoothstep((Expr(0.6) - x * x - y * y) / Expr(0.4));
    GaugeTransform t;
    t.fx = x * bump;
    t.fy = y * bump;
    transforms.push_back({"diffeo", t});
  }

  // the pulled-back coefficients of the bump map are steep; a looser integrator
  // leaves 1e-7 level exit-velocity noise
  ShootingOptions shoot;
  shoot.flow.rtol = shoot.flow.atol = 1e-12;
  std::ostringstream csv;
  csv << "system,transform,action_gap,scatter_gap\n";
  double worst_a = 0.0, worst_s = 0.0;
  for (const MPSystem& sys : c.scenario.primaries()) {
    const auto base_a = action_table(sys, c.k, n, shoot);
    const auto base_s = scatter_table(sys, c.k, n, dirs, shoot.flow);
    for (const Named& tr : transforms) {
      const MPSystem other = apply_gauge(sys, tr.t);
      const auto ta = action_table(other, c.k, n, shoot);
      const auto ts = scatter_table(other, c.k, n, dirs, shoot.flow);
      double ga = 0.0, gs = 0.0;
      for (std::size_t i = 0; i < ta.size(); ++i) ga = std::max(ga, std::abs(ta[i].result.value - base_a[i].result.value));
      for (std::size_t i = 0; i < ts.size(); ++i) {
        gs = std::max({gs, euclidean_norm(ts[i].record.y - base_s[i].record.y),
                       euclidean_norm(ts[i].record.eta - base_s[i].record.eta)});
      }
      csv << fmt("%s,%s,%.6e,%.6e\n", sys.name().c_str(), tr.name.c_str(), ga, gs);
      worst_a = std::max(worst_a, ga);
      worst_s = std::max(worst_s, gs);
    }
  }
  c.bound("max_gauge_action_gap", worst_a, "<=", 1e-6);
  c.bound("max_gauge_scatter_gap", worst_s, "<=", 1e-6);
  c.table("gauge.csv", csv.str());
}

// --- 9. convexity ----------------------------------------------------------------------------

void convexity(Context& c) {
  const int n = c.samples(c.scenario.sampling.boundary);
  double disc = 0.0, min_margin = INFINITY;
  int mismatches = 0;
  for (const MPSystem& sys : c.scenario.primaries()) {
    const MPSystem G = maupertuis_metric(sys, c.k);
    const auto sweep = convexity_sweep(sys, c.k, n);
    std::vector<double> d(n);
    parallel_for(n, [&](std::size_t i) {
      const Vec2 x = sweep[i].x;
      const double scale = std::sqrt(2.0 * (c.k - sys.potential(x)));
      for (double sign : {1.0, -1.0}) {
        const ConformalCheck r = conformal_convexity_check(sys, G, c.k, x, sign * scale * boundary_unit_tangent(sys, x));
        d[i] = std::max(d[i], r.discrepancy());
      }
    });
    for (const ConvexitySample& s : sweep) {
      for (int o = 0; o < 2; ++o) mismatches += (s.margin_mp[o] > 0.0) != (s.margin_g[o] > 0.0);
      min_margin = std::min(min_margin, s.min_mp());
    }
    disc = std::max(disc, max_abs(d));
    std::ostringstream table;
    write_convexity_csv(table, sweep);
    c.table("convexity_" + sys.name() + ".csv", table.str());
  }
  c.bound("max_conformal_discrepancy", disc, "<=", 1e-8);
  c.bound("sign_mismatches", mismatches, "<=", 0);
  c.info("min_mp_margin", min_margin);
}

// --- 10. tangent-exit ------------------------------------------------------------------------

void tangent_exit(Context& c) {
  const int n = c.samples(16);
  const double normals[] = {0.01, 0.025, 0.05};
  std::ostringstream csv;
  csv << "system,angle,normal_component,model,measured,relative_error\n";
  double worst = 0.0, tangent_tau = 0.0;
  int violations = 0;
  for (const MPSystem& sys : c.scenario.primaries()) {
    std::vector<std::array<double, 3>> model(n), measured(n);
    std::vector<double> ttau(n);
    std::vector<int> viol(n);
    parallel_for(n, [&](std::size_t i) {
      const double angle = kTwoPi * i / n;
      const Vec2 x = boundary_point(sys, angle);
      const Vec2 nu = boundary_normal(sys, x);
      const Vec2 t = boundary_unit_tangent(sys, x);
      const double speed = std::sqrt(2.0 * (c.k - sys.potential(x)));
      for (int j = 0; j < 3; ++j) {
        const double a = normals[j];
        const Vec2 xi = a * nu + std::sqrt(speed * speed - a * a) * t;
        model[i][j] = tangent_exit_model(sys, c.k, x, xi);
        measured[i][j] = exit_time(sys, x, xi, c.k);
      }
      for (double sign : {1.0, -1.0}) {
        const Vec2 xi = sign * speed * t;
        ttau[i] = std::max(ttau[i], exit_time(sys, x, xi, c.k));
        const Trajectory tr = integrate(sys, x, xi, c.k, Stop::at_time(1e-2, true));
        for (double s : {1e-4, 1e-3, 1e-2}) viol[i] += !(sys.rho(tr.state_at(s).x) < 0.0);
      }
    });
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double rel = std::abs(model[i][j] - measured[i][j]) / measured[i][j];
        worst = std::max(worst, rel);
        csv << fmt("%s,%.17g,%g,%.17g,%.17g,%.6e\n", sys.name().c_str(), kTwoPi * i / n, normals[j], model[i][j],
                   measured[i][j], rel);
      }
      tangent_tau = std::max(tangent_tau, ttau[i]);
      violations += viol[i];
    }
  }
  c.bound("max_model_relative_error", worst, "<=", 0.1);
  c.bound("max_tangent_exit_time", tangent_tau, "<=", 0.0);
  c.bound("immediate_exit_violations", violations, "<=", 0);
  c.table("tangent_exit.csv", csv.str());
}

// --- 11. minimality --------------------------------------------------------------------------

void minimality(Context& c) {
  const int n_pairs = c.samples(10);
  const int n_triples = c.scenario.sampling.trajectories;
  std::ostringstream csv;
  csv << "system,kind,index,gap\n";
  double undercut = -INFINITY, violation = -INFINITY;
  int skipped = 0, competitors = 0;
  for (const MPSystem& sys : c.scenario.primaries()) {
    const auto pairs = c.random_pairs(n_pairs, 0.2);
    std::vector<double> worst(n_pairs, -INFINITY);
    std::vector<int> skip(n_pairs), count(n_pairs);
    parallel_for(n_pairs, [&](std::size_t i) {
      const Vec2 x = boundary_point(sys, pairs[i].first), y = boundary_point(sys, pairs[i].second);
      const ActionResult r = boundary_action(sys, c.k, x, y);
      const Trajectory t = integrate(sys, x, r.direction, c.k, Stop::at_time(r.time));
      const double T = r.time;
      const Vec2 chord = y - x;
      const Vec2 perp{-chord.y, chord.x};
      for (int mode : {1, 2}) {
        for (double eps : {-0.02, 0.02, 0.05, 0.1}) {
          for (double stretch : {0.9, 1.0, 1.1}) {
            const double T1 = stretch * T;
            const double w = mode * std::numbers::pi / T1;
            ParametricCurve pc;
            pc.duration = T1;
            pc.position = [&, T1, w, eps](double s) { return t.state_at(s * T / T1).x + eps * std::sin(w * s) * perp; };
            pc.velocity = [&, T1, w, eps](double s) {
              return (T / T1) * t.state_at(s * T / T1).xi + eps * w * std::cos(w * s) * perp;
            };
            bool inside = true;
            for (int j = 1; j < 64 && inside; ++j) inside = sys.rho(pc.position(T1 * j / 64.0)) >= -1e-12;
            if (!inside) {
              ++skip[i];
              continue;
            }
            ++count[i];
            worst[i] = std::max(worst[i], r.value - time_free_action(sys, c.k, pc, 128));
          }
        }
      }
    });
    for (int i = 0; i < n_pairs; ++i) {
      csv << fmt("%s,perturbation,%d,%.6e\n", sys.name().c_str(), i, worst[i]);
      undercut = std::max(undercut, worst[i]);
      skipped += skip[i];
      competitors += count[i];
    }

    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    std::vector<std::array<double, 3>> triples;
    while (static_cast<int>(triples.size()) < n_triples) {
      const std::array<double, 3> a{angle(c.rng), angle(c.rng), angle(c.rng)};
      auto far = [](double p, double q) { return std::abs(std::remainder(p - q, kTwoPi)) >= 0.05; };
      if (far(a[0], a[1]) && far(a[1], a[2]) && far(a[0], a[2])) triples.push_back(a);
    }
    std::vector<double> gap(n_triples);
    parallel_for(n_triples, [&](std::size_t i) {
      const Vec2 x = boundary_point(sys, triples[i][0]);
      const Vec2 y = boundary_point(sys, triples[i][1]);
      const Vec2 z = boundary_point(sys, triples[i][2]);
      gap[i] = boundary_action(sys, c.k, x, z).value -
               (boundary_action(sys, c.k, x, y).value + boundary_action(sys, c.k, y, z).value);
    });
    for (int i = 0; i < n_triples; ++i) {
      csv << fmt("%s,triangle,%d,%.6e\n", sys.name().c_str(), i, gap[i]);
      violation = std::max(violation, gap[i]);
    }
  }
  c.bound("max_action_undercut", undercut, "<=", 1e-8);
  c.bound("max_subadditivity_violation", violation, "<=", 1e-8);
  c.info("competitors", competitors);
  c.info("competitors_leaving_domain", skipped);
  c.table("minimality.csv", csv.str());
}

// --- 12. reversibility ------------------------------------------------------------------------

void reversibility(Context& c) {
  const int n = c.samples(50);
  std::ostringstream csv;
  csv << "system,sample,defect\n";
  double worst = 0.0;
  int broken = 0, total = 0;
  bool any_magnetic = false, any_plain = false;
  for (const MPSystem& sys : c.scenario.primaries()) {
    const bool plain = sys.exprs().alpha1.is_constant(0.0) && sys.exprs().alpha2.is_constant(0.0);
    (plain ? any_plain : any_magnetic) = true;
    const auto starts = c.random_starts(n);
    std::vector<double> defect(n);
    parallel_for(n, [&](std::size_t i) {
      const BoundaryStart s = inward_start(sys, c.k, starts[i].first, starts[i].second);
      const ScatterRecord fwd = scattering(sys, c.k, s.x, s.xi);
      const ScatterRecord back = scattering(sys, c.k, fwd.y, -fwd.eta);
      defect[i] = std::max(euclidean_norm(back.y - fwd.x), euclidean_norm(back.eta + fwd.xi));
    });
    for (int i = 0; i < n; ++i) {
      csv << fmt("%s,%d,%.6e\n", sys.name().c_str(), i, defect[i]);
      if (plain) {
        worst = std::max(worst, defect[i]);
      } else {
        broken += defect[i] >= 1e-2;
        ++total;
      }
    }
  }
  if (any_plain) c.bound("max_reversibility_defect", worst, "<=", 1e-8);
  if (any_magnetic) c.bound("broken_fraction", static_cast<double>(broken) / total, ">=", 0.9);
  c.table("reversibility.csv", csv.str());
}

struct Entry {
  const char* name;
  void (*run)(Context&);
};

const Entry kExperiments[] = {
    {"energy", energy_conservation},
    {"reduction-check", reduction_check},
    {"action-reduced", action_reduced},
    {"action-match", action_match},
    {"boundary-traces", boundary_traces},
    {"scattering-conversion", scattering_conversion},
    {"boundary-recovery", boundary_recovery},
    {"gauge", gauge},
    {"convexity", convexity},
    {"tangent-exit", tangent_exit},
    {"minimality", minimality},
    {"reversibility", reversibility},
};

}  // namespace

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const Entry& e : kExperiments) out.emplace_back(e.name);
  return out;
}

Report run_experiment(const Scenario& scenario, const std::string& experiment, const RunOptions& opts) {
  const Entry* entry = nullptr;
  for (const Entry& e : kExperiments) {
    if (experiment == e.name) entry = &e;
  }
  if (!entry) {
    std::string names;
    for (const Entry& e : kExperiments) names += std::string(names.empty() ? "" : ", ") + e.name;
    throw Error(ErrorCode::kInvalidArgument, "unknown experiment '" + experiment + "' (known: " + names + ")");
  }
  if (scenario.primaries().empty()) throw Error(ErrorCode::kInvalidArgument, "scenario is not bound");
  if (opts.samples && *opts.samples < 1) throw Error(ErrorCode::kInvalidArgument, "samples must be positive");

  const double k = opts.k.value_or(scenario.energies.front());
  std::vector<double> energies{k};
  if (experiment == "boundary-recovery") energies.push_back(second_energy(scenario, opts, k));
  const Qualification q = qualify(scenario, energies);
  if (!q.passed()) {
    throw Error(ErrorCode::kQualification, "scenario '" + scenario.name + "' failed qualification:\n" + q.text());
  }

  Report report;
  report.experiment = experiment;
  report.scenario = scenario.name;
  report.settings.emplace_back("k", k);
  if (opts.samples) report.settings.emplace_back("samples", *opts.samples);
  Context ctx(scenario, opts, report);
  try {
    entry->run(ctx);
  } catch (const Error& e) {
    throw Error(e.code(), experiment + " on " + scenario.name + ": " + e.what());
  }
  return report;
}

}  // namespace mprig
