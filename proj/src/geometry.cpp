#include "mprig/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "detail/roots.hpp"

namespace mprig {

Sym2 Sym2::inverse() const {
  const double d = det();
  if (!(a11 > 0.0) || !(d > 0.0) || !std::isfinite(d)) {
    std::ostringstream os;
    os << "metric not positive definite (g11=" << a11 << ", det=" << d << ")";
    throw Error(ErrorCode::kSingularMetric, os.str());
  }
  return {a22 / d, -a12 / d, a11 / d};
}

Vec2 Christoffel::contract(Vec2 a, Vec2 b) const {
  Vec2 out;
  for (int i = 0; i < 2; ++i) {
    double s = 0.0;
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) s += v[i][j][k] * a[j] * b[k];
    }
    out[i] = s;
  }
  return out;
}

namespace {

// Output layout of the dynamics bundle.
enum Dyn : std::size_t {
  kG11, kG12, kG22,
  kG11x, kG12x, kG22x,
  kG11y, kG12y, kG22y,
  kOmega, kU, kUx, kUy, kA1, kA2,
  kDynCount
};

// Output layout of the boundary bundle.
enum Bdy : std::size_t {
  kRho, kRhoX, kRhoY,
  kRhoXX, kRhoXY, kRhoYY,
  kHatX, kHatY,
  kHatXX, kHatXY, kHatYY,
  kBdyCount
};

Expr dx(const Expr& e) { return differentiate(e, Coord::kX); }
Expr dy(const Expr& e) { return differentiate(e, Coord::kY); }

void require_bound(const Expr& e, const char* what) {
  if (!parameters(e).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("system field '") + what + "' has unbound parameters");
  }
}

}  // namespace

struct MPSystem::Impl {
  std::string name;
  SystemExprs exprs;
  CompiledBundle dynamics;
  CompiledBundle boundary;
  CompiledBundle rho;  // rho with first and second derivatives
};

MPSystem::MPSystem(std::string name, SystemExprs e) {
  require_bound(e.g11, "g11");
  require_bound(e.g12, "g12");
  require_bound(e.g22, "g22");
  require_bound(e.alpha1, "alpha1");
  require_bound(e.alpha2, "alpha2");
  require_bound(e.potential, "U");
  require_bound(e.rho, "rho");

  auto impl = std::make_shared<Impl>();
  impl->name = std::move(name);

  const std::vector<Expr> dyn = {
      e.g11, e.g12, e.g22,
      dx(e.g11), dx(e.g12), dx(e.g22),
      dy(e.g11), dy(e.g12), dy(e.g22),
      dx(e.alpha2) - dy(e.alpha1),
      e.potential, dx(e.potential), dy(e.potential),
      e.alpha1, e.alpha2,
  };
  impl->dynamics = CompiledBundle(dyn);

  // rho_hat = rho / |grad rho|_g, with g^{-1} written out symbolically.
  const Expr det = e.g11 * e.g22 - e.g12 * e.g12;
  const Expr rx = dx(e.rho);
  const Expr ry = dy(e.rho);
  const Expr grad_sq = (e.g22 * rx * rx - Expr(2.0) * e.g12 * rx * ry + e.g11 * ry * ry) / det;
  const Expr hat = e.rho / sqrt(grad_sq);
  const Expr hx = dx(hat);
  const Expr hy = dy(hat);
  const std::vector<Expr> bdy = {
      e.rho, rx, ry, dx(rx), dy(rx), dy(ry), hx, hy, dx(hx), dy(hx), dy(hy),
  };
  impl->boundary = CompiledBundle(bdy);
  impl->rho = CompiledBundle(std::span<const Expr>(bdy.data(), kHatX));
  impl->exprs = std::move(e);
  impl_ = std::move(impl);
}

MPSystem MPSystem::from_strings(std::string name, const std::string& g11, const std::string& g12,
                                const std::string& g22, const std::string& alpha1,
                                const std::string& alpha2, const std::string& potential,
                                const std::string& rho, const ParamMap& params) {
  std::set<std::string, std::less<>> names;
  for (const auto& [k, v] : params) names.insert(k);
  auto field = [&](const std::string& text) { return bind_parameters(parse(text, names), params); };
  SystemExprs e;
  e.g11 = field(g11);
  e.g12 = field(g12);
  e.g22 = field(g22);
  e.alpha1 = field(alpha1);
  e.alpha2 = field(alpha2);
  e.potential = field(potential);
  e.rho = field(rho);
  return MPSystem(std::move(name), std::move(e));
}

const std::string& MPSystem::name() const { return impl_->name; }
const SystemExprs& MPSystem::exprs() const { return impl_->exprs; }

LocalGeometry MPSystem::local(Vec2 p) const {
  std::array<double, kDynCount> v{};
  impl_->dynamics.evaluate(p.x, p.y, v);
  LocalGeometry lg;
  lg.g = {v[kG11], v[kG12], v[kG22]};
  lg.dg[0] = {v[kG11x], v[kG12x], v[kG22x]};
  lg.dg[1] = {v[kG11y], v[kG12y], v[kG22y]};
  lg.ginv = lg.g.inverse();
  lg.omega = v[kOmega];
  lg.potential = v[kU];
  lg.dpotential = {v[kUx], v[kUy]};
  lg.alpha = {v[kA1], v[kA2]};
  return lg;
}

Sym2 MPSystem::metric(Vec2 p) const { return local(p).g; }
double MPSystem::potential(Vec2 p) const { return local(p).potential; }
Vec2 MPSystem::potential_differential(Vec2 p) const { return local(p).dpotential; }
Vec2 MPSystem::alpha(Vec2 p) const { return local(p).alpha; }
double MPSystem::magnetic_field(Vec2 p) const { return local(p).omega; }

BoundaryJet MPSystem::boundary_jet(Vec2 p) const {
  std::array<double, kBdyCount> v{};
  impl_->boundary.evaluate(p.x, p.y, v);
  BoundaryJet j;
  j.rho = v[kRho];
  j.drho = {v[kRhoX], v[kRhoY]};
  j.drho_hat = {v[kHatX], v[kHatY]};
  j.d2rho_hat = {v[kHatXX], v[kHatXY], v[kHatYY]};
  return j;
}

double MPSystem::rho(Vec2 p) const {
  std::array<double, kHatX> v{};
  impl_->rho.evaluate(p.x, p.y, v);
  return v[0];
}

Vec2 MPSystem::rho_differential(Vec2 p) const {
  std::array<double, kHatX> v{};
  impl_->rho.evaluate(p.x, p.y, v);
  return {v[1], v[2]};
}

Sym2 MPSystem::rho_second_derivatives(Vec2 p) const {
  std::array<double, kHatX> v{};
  impl_->rho.evaluate(p.x, p.y, v);
  return {v[kRhoXX], v[kRhoXY], v[kRhoYY]};
}

// ---------------------------------------------------------------------------

double inner(const MPSystem& sys, Vec2 p, Vec2 a, Vec2 b) { return sys.metric(p).quadratic(a, b); }

double norm(const MPSystem& sys, Vec2 p, Vec2 v) { return std::sqrt(inner(sys, p, v, v)); }

double energy(const MPSystem& sys, Vec2 x, Vec2 xi) {
  const LocalGeometry lg = sys.local(x);
  return 0.5 * lg.g.quadratic(xi, xi) + lg.potential;
}

Christoffel christoffel(const LocalGeometry& lg) {
  // Gamma^i_{jk} = 1/2 g^{il} (d_j g_{lk} + d_k g_{jl} - d_l g_{jk})
  Christoffel c;
  for (int j = 0; j < 2; ++j) {
    for (int k = j; k < 2; ++k) {
      std::array<double, 2> lowered{};
      for (int l = 0; l < 2; ++l) {
        lowered[l] = 0.5 * (lg.dg[j](l, k) + lg.dg[k](j, l) - lg.dg[l](j, k));
      }
      for (int i = 0; i < 2; ++i) {
        const double s = lg.ginv(i, 0) * lowered[0] + lg.ginv(i, 1) * lowered[1];
        c.v[i][j][k] = s;
        c.v[i][k][j] = s;
      }
    }
  }
  return c;
}

Christoffel christoffel(const MPSystem& sys, Vec2 p) { return christoffel(sys.local(p)); }

Vec2 lorentz_force(const LocalGeometry& lg, Vec2 xi) {
  // Lowered: Y_j = Omega_{kj} xi^k, with Omega_21 = -Omega_12.
  const Vec2 lowered{-lg.omega * xi.y, lg.omega * xi.x};
  return lg.ginv * lowered;
}

Vec2 lorentz_force(const MPSystem& sys, Vec2 p, Vec2 xi) { return lorentz_force(sys.local(p), xi); }

Vec2 grad_potential(const MPSystem& sys, Vec2 p) {
  const LocalGeometry lg = sys.local(p);
  return lg.ginv * lg.dpotential;
}

Vec2 boundary_normal(const MPSystem& sys, Vec2 p, double boundary_tol) {
  const double r = sys.rho(p);
  if (std::abs(r) > boundary_tol) {
    std::ostringstream os;
    os << "point (" << p.x << ", " << p.y << ") is not on the boundary (rho=" << r << ")";
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
  const Vec2 d = sys.rho_differential(p);
  const Sym2 ginv = sys.metric(p).inverse();
  const Vec2 grad = ginv * d;
  const double n2 = dot(grad, d);
  if (!(n2 > 1e-24)) throw Error(ErrorCode::kDegenerateGradient, "grad rho vanishes on the boundary");
  return grad / std::sqrt(n2);
}

Vec2 boundary_unit_tangent(const MPSystem& sys, Vec2 p) {
  const Vec2 d = sys.rho_differential(p);
  // d rho annihilates (d_y rho, -d_x rho); for rho decreasing outward this
  // runs counterclockwise.
  const Vec2 w{d.y, -d.x};
  const double n = norm(sys, p, w);
  if (!(n > 1e-12)) throw Error(ErrorCode::kDegenerateGradient, "grad rho vanishes");
  return w / n;
}

MPSystem maupertuis_metric(const MPSystem& sys, double k, const std::vector<Vec2>& samples) {
  for (const Vec2& p : samples) {
    const double u = sys.potential(p);
    if (!(k > u)) {
      std::ostringstream os;
      os << "energy k=" << k << " does not exceed U=" << u << " at (" << p.x << ", " << p.y << ")";
      throw Error(ErrorCode::kEnergyLevel, os.str());
    }
  }
  const SystemExprs& e = sys.exprs();
  const Expr factor = Expr(2.0) * (Expr(k) - e.potential);
  SystemExprs r;
  r.g11 = factor * e.g11;
  r.g12 = factor * e.g12;
  r.g22 = factor * e.g22;
  r.alpha1 = e.alpha1;
  r.alpha2 = e.alpha2;
  r.potential = Expr(0.0);
  r.rho = e.rho;
  std::ostringstream name;
  name << sys.name() << "/maupertuis(k=" << k << ")";
  return MPSystem(name.str(), std::move(r));
}

MPSystem maupertuis_metric(const MPSystem& sys, double k) {
  return maupertuis_metric(sys, k, domain_samples(sys));
}

// ---------------------------------------------------------------------------

namespace {

double boundary_radius(const MPSystem& sys, double angle) {
  const Vec2 e{std::cos(angle), std::sin(angle)};
  auto f = [&](double r) { return sys.rho(r * e); };
  const double f0 = f(0.0);
  if (!(f0 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "origin is not inside the domain");
  double lo = 0.0;
  double flo = f0;
  double step = 0.0625;
  for (int i = 0; i < 400; ++i) {
    const double hi = lo + step;
    const double fhi = f(hi);
    if (fhi <= 0.0) return detail::bracketed_root(f, lo, hi, flo, fhi);
    lo = hi;
    flo = fhi;
    step *= 1.1;
  }
  throw Error(ErrorCode::kInvalidArgument, "domain boundary not found along ray");
}

}  // namespace

Vec2 boundary_point(const MPSystem& sys, double angle) {
  const double r = boundary_radius(sys, angle);
  return {r * std::cos(angle), r * std::sin(angle)};
}

Vec2 boundary_tangent(const MPSystem& sys, double angle) {
  const double r = boundary_radius(sys, angle);
  const Vec2 e{std::cos(angle), std::sin(angle)};
  const Vec2 eperp{-e.y, e.x};
  const Vec2 d = sys.rho_differential(r * e);
  const double radial = dot(d, e);
  if (radial == 0.0) throw Error(ErrorCode::kDegenerateGradient, "boundary tangent to a ray");
  const double dr = -r * dot(d, eperp) / radial;
  return dr * e + r * eperp;
}

std::vector<Vec2> domain_samples(const MPSystem& sys, int n_radii, int n_angles) {
  std::vector<Vec2> out;
  out.push_back({0.0, 0.0});
  for (int a = 0; a < n_angles; ++a) {
    const double angle = 2.0 * std::numbers::pi * a / n_angles;
    const Vec2 b = boundary_point(sys, angle);
    for (int i = 1; i < n_radii; ++i) out.push_back((static_cast<double>(i) / n_radii) * b);
    out.push_back(b);
  }
  return out;
}

BoundaryStart inward_start(const MPSystem& sys, double k, double angle, double psi) {
  BoundaryStart s;
  s.x = boundary_point(sys, angle);
  const double u = sys.potential(s.x);
  if (!(k > u)) throw Error(ErrorCode::kEnergyLevel, "energy below the potential at the boundary");
  const Vec2 nu = boundary_normal(sys, s.x);
  const Vec2 t = boundary_unit_tangent(sys, s.x);
  const double speed = std::sqrt(2.0 * (k - u));
  s.xi = speed * (std::cos(psi) * nu + std::sin(psi) * t);
  return s;
}

}  // namespace mprig
