#pragma once

// Scalar expressions in the two chart coordinates (x, y).
//
// Expressions are immutable DAGs behind shared pointers. Construction performs
// constant folding and drops neutral elements, nothing more. Derivatives are
// exact and symbolic; evaluation of many expressions at once goes through
// CompiledBundle, which flattens the DAG into a register program with common
// subexpressions merged.

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mprig/error.hpp"

namespace mprig {

enum class Coord { kX = 0, kY = 1 };

using ParamMap = std::map<std::string, double, std::less<>>;

class Expr {
 public:
  enum class Kind : std::uint8_t {
    kConst,
    kVar,
    kParam,
    kNeg,
    kSin,
    kCos,
    kExp,
    kLog,
    kSqrt,
    kTanh,
    kSmoothstep,
    kDSmoothstep,
    kFlatPow,  // e^{-1/u} u^{-m} for u > 0, else 0
    kAdd,
    kSub,
    kMul,
    kDiv,
    kPow,
  };

  struct Node;

  Expr();  // constant 0
  explicit Expr(double value);

  static Expr constant(double value);
  static Expr var(Coord c);
  static Expr param(std::string name);
  static Expr unary(Kind kind, Expr arg);
  static Expr flatpow(Expr arg, int m);
  static Expr pow(Expr base, Expr exponent);
  /// Wraps a node verbatim, without folding.
  static Expr make(Node n);

  Kind kind() const;
  double value() const;  // kConst only
  Coord coord() const;   // kVar only
  const std::string& name() const;  // kParam only
  int order() const;     // kFlatPow only
  const Expr& lhs() const;
  const Expr& rhs() const;
  std::size_t arity() const;

  bool is_constant() const { return kind() == Kind::kConst; }
  bool is_constant(double v) const { return is_constant() && value() == v; }
  const Node* id() const { return node_.get(); }

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);

 private:
  struct EmptyTag {};
  explicit Expr(EmptyTag) {}  // child slot of a node with lower arity
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  Kind kind = Kind::kConst;
  double value = 0.0;
  int index = 0;  // coordinate for kVar, order for kFlatPow
  std::string name;
  Expr a{EmptyTag{}};
  Expr b{EmptyTag{}};
};

Expr sin(const Expr& e);
Expr cos(const Expr& e);
Expr exp(const Expr& e);
Expr log(const Expr& e);
Expr sqrt(const Expr& e);
Expr tanh(const Expr& e);
Expr smoothstep(const Expr& e);
Expr pow(const Expr& base, double exponent);

/// Parses infix text. Identifiers other than x, y, pi and the built-in
/// functions must appear in `params`.
Expr parse(std::string_view text, const std::set<std::string, std::less<>>& params = {});

/// Prints text that parse() maps back to an evaluation-equivalent expression.
std::string to_string(const Expr& e);

Expr differentiate(const Expr& e, Coord c);

/// Replaces x and y by the given expressions (composition e(fx, fy)).
Expr substitute(const Expr& e, const Expr& fx, const Expr& fy);

/// Replaces parameters by their values and folds constants. Throws on unbound
/// parameters.
Expr bind_parameters(const Expr& e, const ParamMap& params);

std::set<std::string> parameters(const Expr& e);
bool depends_on_coords(const Expr& e);

/// Reference tree-walking evaluation. Throws kDomain on a non-finite result.
double evaluate(const Expr& e, double x, double y, const ParamMap& params = {});

/// The exp-based C-infinity step and its derivative.
double smoothstep_value(double t);
double smoothstep_derivative(double t);
double flatpow_value(double u, int m);

/// Several parameter-free expressions compiled into one register program.
class CompiledBundle {
 public:
  CompiledBundle() = default;
  explicit CompiledBundle(std::span<const Expr> outputs);

  std::size_t size() const { return outputs_.size(); }
  std::size_t program_length() const { return program_.size(); }

  /// Writes one value per output. Throws kDomain if any output is not finite.
  void evaluate(double x, double y, std::span<double> out) const;

 private:
  struct Instr {
    Expr::Kind op;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double c = 0.0;
    int m = 0;
  };
  std::vector<Instr> program_;
  std::vector<std::int32_t> outputs_;
  std::vector<std::string> labels_;
};

/// An expression together with the values of its free parameters.
class ScalarField {
 public:
  ScalarField() : ScalarField(Expr(0.0)) {}
  explicit ScalarField(Expr e, ParamMap params = {});
  static ScalarField parse(std::string_view text, const ParamMap& params = {});

  const Expr& expr() const { return expr_; }
  const ParamMap& params() const { return params_; }
  /// The expression with every parameter replaced by its value.
  const Expr& bound() const { return bound_; }

  double operator()(double x, double y) const;
  ScalarField derivative(Coord c) const;

 private:
  Expr expr_;
  ParamMap params_;
  Expr bound_;
  std::shared_ptr<const CompiledBundle> compiled_;
};

}  // namespace mprig
