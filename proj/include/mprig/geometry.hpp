#pragma once

// Pointwise geometry of an MP-system (g, alpha, U) on a planar chart domain
// {rho >= 0}. Every derivative is symbolic; the system compiles its fields and
// their derivatives once at construction.
//
// Orientation convention: Omega_12 = d_1 alpha_2 - d_2 alpha_1, and the Lorentz
// force is Y^i = g^{ij} Omega_{kj} xi^k so that <Y(xi), eta>_g = Omega(xi, eta).

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "mprig/expr.hpp"

namespace mprig {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  double operator[](int i) const { return i == 0 ? x : y; }
  double& operator[](int i) { return i == 0 ? x : y; }

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  Vec2& operator+=(Vec2 b) {
    x += b.x;
    y += b.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double euclidean_norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Symmetric 2x2 matrix.
struct Sym2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a22 = 0.0;

  double operator()(int i, int j) const {
    if (i == 0 && j == 0) return a11;
    if (i == 1 && j == 1) return a22;
    return a12;
  }
  double det() const { return a11 * a22 - a12 * a12; }
  Vec2 operator*(Vec2 v) const { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }
  double quadratic(Vec2 u, Vec2 v) const { return dot(u, (*this) * v); }
  /// Throws kSingularMetric unless positive definite.
  Sym2 inverse() const;
  bool positive_definite() const { return a11 > 0.0 && det() > 0.0; }
};

/// Christoffel symbols Gamma^i_{jk}.
struct Christoffel {
  std::array<std::array<std::array<double, 2>, 2>, 2> v{};
  double operator()(int i, int j, int k) const { return v[i][j][k]; }
  /// Gamma^i_{jk} a^j b^k
  Vec2 contract(Vec2 a, Vec2 b) const;
};

/// Coordinate expressions of a system. Parameters must already be bound.
struct SystemExprs {
  Expr g11{1.0};
  Expr g12{0.0};
  Expr g22{1.0};
  Expr alpha1{0.0};
  Expr alpha2{0.0};
  Expr potential{0.0};
  Expr rho;
};

/// Everything the flow right-hand side needs at one point.
struct LocalGeometry {
  Sym2 g;
  std::array<Sym2, 2> dg;  // dg[k] = d_k g
  Sym2 ginv;
  double omega = 0.0;      // Omega_12
  double potential = 0.0;
  Vec2 dpotential;         // d_i U
  Vec2 alpha;              // alpha_i
};

/// Data for boundary computations based on the renormalised defining function
/// rho_hat = rho / |grad rho|_g.
struct BoundaryJet {
  double rho = 0.0;
  Vec2 drho;
  Vec2 drho_hat;
  Sym2 d2rho_hat;  // coordinate second derivatives of rho_hat
};

class MPSystem {
 public:
  MPSystem(std::string name, SystemExprs exprs);

  /// Builds a system from expression strings; identifiers other than x, y
  /// are looked up in `params`.
  static MPSystem from_strings(std::string name, const std::string& g11, const std::string& g12,
                               const std::string& g22, const std::string& alpha1,
                               const std::string& alpha2, const std::string& potential,
                               const std::string& rho, const ParamMap& params = {});

  const std::string& name() const;
  const SystemExprs& exprs() const;

  LocalGeometry local(Vec2 p) const;
  Sym2 metric(Vec2 p) const;
  double potential(Vec2 p) const;
  Vec2 potential_differential(Vec2 p) const;
  Vec2 alpha(Vec2 p) const;
  double magnetic_field(Vec2 p) const;
  double rho(Vec2 p) const;
  Vec2 rho_differential(Vec2 p) const;
  Sym2 rho_second_derivatives(Vec2 p) const;
  BoundaryJet boundary_jet(Vec2 p) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

// --- pointwise operations --------------------------------------------------

double inner(const MPSystem& sys, Vec2 p, Vec2 a, Vec2 b);
double norm(const MPSystem& sys, Vec2 p, Vec2 v);
double energy(const MPSystem& sys, Vec2 x, Vec2 xi);

Christoffel christoffel(const MPSystem& sys, Vec2 p);
Christoffel christoffel(const LocalGeometry& lg);

Vec2 lorentz_force(const MPSystem& sys, Vec2 p, Vec2 xi);
Vec2 lorentz_force(const LocalGeometry& lg, Vec2 xi);

/// (grad U)^i = g^{ij} d_j U
Vec2 grad_potential(const MPSystem& sys, Vec2 p);

/// Inward g-unit normal grad_g rho / |grad_g rho|_g at a boundary point.
Vec2 boundary_normal(const MPSystem& sys, Vec2 p, double boundary_tol = 1e-8);

/// The magnetic system (G, alpha) with G = 2(k - U) g, zero potential and the
/// same rho. `samples` are domain points where k > U is checked.
MPSystem maupertuis_metric(const MPSystem& sys, double k, const std::vector<Vec2>& samples);
MPSystem maupertuis_metric(const MPSystem& sys, double k);

// --- domain sampling (domains star-shaped about the origin) ----------------

/// The boundary point on the ray of the given polar angle.
Vec2 boundary_point(const MPSystem& sys, double angle);
/// d/d(angle) of boundary_point.
Vec2 boundary_tangent(const MPSystem& sys, double angle);
/// Polar grid of interior points plus `n_angles` boundary points.
std::vector<Vec2> domain_samples(const MPSystem& sys, int n_radii = 12, int n_angles = 48);

/// g-unit tangent to the level set of rho through p, oriented counterclockwise
/// around the domain.
Vec2 boundary_unit_tangent(const MPSystem& sys, Vec2 p);

/// Boundary phase point with chart angle `angle` and velocity of energy k at
/// angle `psi` from the inward normal (psi in (-pi/2, pi/2)).
struct BoundaryStart {
  Vec2 x;
  Vec2 xi;
};
BoundaryStart inward_start(const MPSystem& sys, double k, double angle, double psi);

/// Polar angle of a chart vector.
inline double chart_angle(Vec2 v) { return std::atan2(v.y, v.x); }

}  // namespace mprig
