#include "mprig/expr.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace mprig {

namespace {

using Kind = Expr::Kind;

bool is_unary(Kind k) {
  switch (k) {
    case Kind::kNeg:
    case Kind::kSin:
    case Kind::kCos:
    case Kind::kExp:
    case Kind::kLog:
    case Kind::kSqrt:
    case Kind::kTanh:
    case Kind::kSmoothstep:
    case Kind::kDSmoothstep:
    case Kind::kFlatPow:
      return true;
    default:
      return false;
  }
}

bool is_binary(Kind k) {
  return k == Kind::kAdd || k == Kind::kSub || k == Kind::kMul || k == Kind::kDiv ||
         k == Kind::kPow;
}

double apply_unary(Kind k, double v, int m) {
  switch (k) {
    case Kind::kNeg: return -v;
    case Kind::kSin: return std::sin(v);
    case Kind::kCos: return std::cos(v);
    case Kind::kExp: return std::exp(v);
    case Kind::kLog: return std::log(v);
    case Kind::kSqrt: return std::sqrt(v);
    case Kind::kTanh: return std::tanh(v);
    case Kind::kSmoothstep: return smoothstep_value(v);
    case Kind::kDSmoothstep: return smoothstep_derivative(v);
    case Kind::kFlatPow: return flatpow_value(v, m);
    default: break;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double apply_pow(double base, double e) {
  if (e == 2.0) return base * base;
  if (e == 1.0) return base;
  if (e == 0.5) return std::sqrt(base);
  if (e == -1.0) return 1.0 / base;
  return std::pow(base, e);
}

double apply_binary(Kind k, double a, double b) {
  switch (k) {
    case Kind::kAdd: return a + b;
    case Kind::kSub: return a - b;
    case Kind::kMul: return a * b;
    case Kind::kDiv: return a / b;
    case Kind::kPow: return apply_pow(a, b);
    default: break;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

const char* unary_name(Kind k) {
  switch (k) {
    case Kind::kSin: return "sin";
    case Kind::kCos: return "cos";
    case Kind::kExp: return "exp";
    case Kind::kLog: return "log";
    case Kind::kSqrt: return "sqrt";
    case Kind::kTanh: return "tanh";
    case Kind::kSmoothstep: return "smoothstep";
    case Kind::kDSmoothstep: return "dsmoothstep";
    case Kind::kFlatPow: return "flatpow";
    default: return "";
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Scalar primitives

double smoothstep_value(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  // e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})
  return 1.0 / (1.0 + std::exp(1.0 / t - 1.0 / (1.0 - t)));
}

double smoothstep_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double b = smoothstep_value(t);
  if (b == 0.0 || b == 1.0) return 0.0;
  const double s = 1.0 - t;
  return b * (1.0 - b) * (1.0 / (t * t) + 1.0 / (s * s));
}

double flatpow_value(double u, int m) {
  if (u <= 0.0) return 0.0;
  return std::exp(-1.0 / u - m * std::log(u));
}

// ---------------------------------------------------------------------------
// Construction

namespace {

Expr make_node(Expr::Node n);

}  // namespace

Expr Expr::make(Node n) { return Expr(std::make_shared<const Node>(std::move(n))); }

Expr::Expr() : Expr(0.0) {}

Expr::Expr(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::kConst;
  n->value = value;
  node_ = std::move(n);
}

Expr Expr::constant(double value) { return Expr(value); }

Expr Expr::var(Coord c) {
  Node n;
  n.kind = Kind::kVar;
  n.index = static_cast<int>(c);
  return make_node(std::move(n));
}

Expr Expr::param(std::string name) {
  Node n;
  n.kind = Kind::kParam;
  n.name = std::move(name);
  return make_node(std::move(n));
}

Expr Expr::unary(Kind kind, Expr arg) {
  if (!is_unary(kind) || kind == Kind::kFlatPow) {
    throw Error(ErrorCode::kInvalidArgument, "Expr::unary: not a unary kind");
  }
  if (arg.is_constant()) {
    const double v = apply_unary(kind, arg.value(), 0);
    if (std::isfinite(v)) return Expr(v);
  }
  if (kind == Kind::kNeg && arg.kind() == Kind::kNeg) return arg.lhs();
  Node n;
  n.kind = kind;
  n.a = std::move(arg);
  return make_node(std::move(n));
}

Expr Expr::flatpow(Expr arg, int m) {
  if (arg.is_constant()) {
    const double v = flatpow_value(arg.value(), m);
    if (std::isfinite(v)) return Expr(v);
  }
  Node n;
  n.kind = Kind::kFlatPow;
  n.index = m;
  n.a = std::move(arg);
  return make_node(std::move(n));
}

Expr Expr::pow(Expr base, Expr exponent) {
  if (depends_on_coords(exponent)) {
    throw Error(ErrorCode::kInvalidArgument, "exponent must not depend on x or y");
  }
  if (exponent.is_constant()) {
    if (exponent.value() == 1.0) return base;
    if (exponent.value() == 0.0) return Expr(1.0);
    if (base.is_constant()) {
      const double v = apply_pow(base.value(), exponent.value());
      if (std::isfinite(v)) return Expr(v);
    }
  }
  Node n;
  n.kind = Kind::kPow;
  n.a = std::move(base);
  n.b = std::move(exponent);
  return make_node(std::move(n));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
Coord Expr::coord() const { return static_cast<Coord>(node_->index); }
const std::string& Expr::name() const { return node_->name; }
int Expr::order() const { return node_->index; }
const Expr& Expr::lhs() const { return node_->a; }
const Expr& Expr::rhs() const { return node_->b; }

std::size_t Expr::arity() const {
  if (is_unary(kind())) return 1;
  if (is_binary(kind())) return 2;
  return 0;
}

namespace {

Expr make_node(Expr::Node n) { return Expr::make(std::move(n)); }

Expr binary(Kind kind, const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) {
    const double v = apply_binary(kind, a.value(), b.value());
    if (std::isfinite(v)) return Expr(v);
  }
  Expr::Node n;
  n.kind = kind;
  n.a = a;
  n.b = b;
  return make_node(std::move(n));
}

}  // namespace

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return binary(Kind::kAdd, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  return binary(Kind::kSub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  return binary(Kind::kMul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr(0.0);
  return binary(Kind::kDiv, a, b);
}

Expr operator-(const Expr& a) { return Expr::unary(Kind::kNeg, a); }

Expr sin(const Expr& e) { return Expr::unary(Kind::kSin, e); }
Expr cos(const Expr& e) { return Expr::unary(Kind::kCos, e); }
Expr exp(const Expr& e) { return Expr::unary(Kind::kExp, e); }
Expr log(const Expr& e) { return Expr::unary(Kind::kLog, e); }
Expr sqrt(const Expr& e) { return Expr::unary(Kind::kSqrt, e); }
Expr tanh(const Expr& e) { return Expr::unary(Kind::kTanh, e); }
Expr smoothstep(const Expr& e) { return Expr::unary(Kind::kSmoothstep, e); }
Expr pow(const Expr& base, double exponent) { return Expr::pow(base, Expr(exponent)); }

// ---------------------------------------------------------------------------
// Structural queries

namespace {

template <class F>
void visit_once(const Expr& e, std::unordered_map<const Expr::Node*, bool>& seen, F&& f) {
  if (seen.count(e.id())) return;
  seen[e.id()] = true;
  f(e);
  if (e.arity() >= 1) visit_once(e.lhs(), seen, f);
  if (e.arity() == 2) visit_once(e.rhs(), seen, f);
}

}  // namespace

std::set<std::string> parameters(const Expr& e) {
  std::set<std::string> out;
  std::unordered_map<const Expr::Node*, bool> seen;
  visit_once(e, seen, [&](const Expr& n) {
    if (n.kind() == Kind::kParam) out.insert(n.name());
  });
  return out;
}

bool depends_on_coords(const Expr& e) {
  bool found = false;
  std::unordered_map<const Expr::Node*, bool> seen;
  visit_once(e, seen, [&](const Expr& n) {
    if (n.kind() == Kind::kVar) found = true;
  });
  return found;
}

// ---------------------------------------------------------------------------
// Rewriting

namespace {

class Rewriter {
 public:
  using Leaf = std::function<Expr(const Expr&)>;
  explicit Rewriter(Leaf leaf) : leaf_(std::move(leaf)) {}

  Expr operator()(const Expr& e) {
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    Expr out;
    switch (e.kind()) {
      case Kind::kConst:
      case Kind::kVar:
      case Kind::kParam:
        out = leaf_(e);
        break;
      case Kind::kFlatPow:
        out = Expr::flatpow((*this)(e.lhs()), e.order());
        break;
      case Kind::kAdd: out = (*this)(e.lhs()) + (*this)(e.rhs()); break;
      case Kind::kSub: out = (*this)(e.lhs()) - (*this)(e.rhs()); break;
      case Kind::kMul: out = (*this)(e.lhs()) * (*this)(e.rhs()); break;
      case Kind::kDiv: out = (*this)(e.lhs()) / (*this)(e.rhs()); break;
      case Kind::kPow: out = Expr::pow((*this)(e.lhs()), (*this)(e.rhs())); break;
      default:
        out = Expr::unary(e.kind(), (*this)(e.lhs()));
        break;
    }
    memo_.emplace(e.id(), out);
    return out;
  }

 private:
  Leaf leaf_;
  std::unordered_map<const Expr::Node*, Expr> memo_;
};

}  // namespace

Expr substitute(const Expr& e, const Expr& fx, const Expr& fy) {
  Rewriter r([&](const Expr& leaf) -> Expr {
    if (leaf.kind() == Kind::kVar) return leaf.coord() == Coord::kX ? fx : fy;
    return leaf;
  });
  return r(e);
}

Expr bind_parameters(const Expr& e, const ParamMap& params) {
  Rewriter r([&](const Expr& leaf) -> Expr {
    if (leaf.kind() != Kind::kParam) return leaf;
    auto it = params.find(leaf.name());
    if (it == params.end()) {
      throw Error(ErrorCode::kUnknownIdentifier, "unbound parameter '" + leaf.name() + "'");
    }
    return Expr(it->second);
  });
  return r(e);
}

namespace {

class Differentiator {
 public:
  explicit Differentiator(Coord c) : c_(c) {}

  Expr operator()(const Expr& e) {
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    Expr d = compute(e);
    memo_.emplace(e.id(), d);
    return d;
  }

 private:
  Expr compute(const Expr& e) {
    switch (e.kind()) {
      case Kind::kConst:
      case Kind::kParam:
        return Expr(0.0);
      case Kind::kVar:
        return Expr(e.coord() == c_ ? 1.0 : 0.0);
      case Kind::kNeg:
        return -(*this)(e.lhs());
      case Kind::kSin:
        return cos(e.lhs()) * (*this)(e.lhs());
      case Kind::kCos:
        return -(sin(e.lhs()) * (*this)(e.lhs()));
      case Kind::kExp:
        return e * (*this)(e.lhs());
      case Kind::kLog:
        return (*this)(e.lhs()) / e.lhs();
      case Kind::kSqrt:
        return (*this)(e.lhs()) / (Expr(2.0) * e);
      case Kind::kTanh:
        return (Expr(1.0) - e * e) * (*this)(e.lhs());
      case Kind::kSmoothstep:
        return Expr::unary(Kind::kDSmoothstep, e.lhs()) * (*this)(e.lhs());
      case Kind::kDSmoothstep: {
        // B'(u) = (F2(u) F0(1-u) + F0(u) F2(1-u)) / (F0(u) + F0(1-u))^2 with
        // Fm(u) = e^{-1/u} u^{-m}; this form is closed under differentiation.
        const Expr& u = e.lhs();
        const Expr w = Expr(1.0) - u;
        const Expr den = Expr::flatpow(u, 0) + Expr::flatpow(w, 0);
        const Expr expanded =
            (Expr::flatpow(u, 2) * Expr::flatpow(w, 0) + Expr::flatpow(u, 0) * Expr::flatpow(w, 2)) /
            (den * den);
        return (*this)(expanded);
      }
      case Kind::kFlatPow: {
        const int m = e.order();
        const Expr& u = e.lhs();
        const Expr inner = Expr::flatpow(u, m + 2) - Expr(static_cast<double>(m)) * Expr::flatpow(u, m + 1);
        return inner * (*this)(u);
      }
      case Kind::kAdd:
        return (*this)(e.lhs()) + (*this)(e.rhs());
      case Kind::kSub:
        return (*this)(e.lhs()) - (*this)(e.rhs());
      case Kind::kMul:
        return (*this)(e.lhs()) * e.rhs() + e.lhs() * (*this)(e.rhs());
      case Kind::kDiv: {
        const Expr& a = e.lhs();
        const Expr& b = e.rhs();
        const Expr da = (*this)(a);
        const Expr db = (*this)(b);
        if (db.is_constant(0.0)) return da / b;
        return (da * b - a * db) / (b * b);
      }
      case Kind::kPow: {
        const Expr& base = e.lhs();
        const Expr& ex = e.rhs();
        return ex * Expr::pow(base, ex - Expr(1.0)) * (*this)(base);
      }
    }
    return Expr(0.0);
  }

  Coord c_;
  std::unordered_map<const Expr::Node*, Expr> memo_;
};

}  // namespace

Expr differentiate(const Expr& e, Coord c) {
  Differentiator d(c);
  return d(e);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

void print_number(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  if (v < 0) {
    os << '(' << buf << ')';
  } else {
    os << buf;
  }
}

void print(std::ostream& os, const Expr& e) {
  switch (e.kind()) {
    case Kind::kConst: print_number(os, e.value()); return;
    case Kind::kVar: os << (e.coord() == Coord::kX ? 'x' : 'y'); return;
    case Kind::kParam: os << e.name(); return;
    case Kind::kNeg:
      os << "(-";
      print(os, e.lhs());
      os << ')';
      return;
    case Kind::kFlatPow:
      os << "flatpow(";
      print(os, e.lhs());
      os << ", " << e.order() << ')';
      return;
    case Kind::kAdd:
    case Kind::kSub:
    case Kind::kMul:
    case Kind::kDiv:
    case Kind::kPow: {
      const char op = e.kind() == Kind::kAdd   ? '+'
                      : e.kind() == Kind::kSub ? '-'
                      : e.kind() == Kind::kMul ? '*'
                      : e.kind() == Kind::kDiv ? '/'
                                               : '^';
      os << '(';
      print(os, e.lhs());
      os << ' ' << op << ' ';
      print(os, e.rhs());
      os << ')';
      return;
    }
    default:
      os << unary_name(e.kind()) << '(';
      print(os, e.lhs());
      os << ')';
      return;
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::ostringstream os;
  print(os, e);
  return os.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
 public:
  Parser(std::string_view text, const std::set<std::string, std::less<>>& params)
      : text_(text), params_(params) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= text_.size()) fail({"expression"}, "empty expression");
    Expr e = parse_sum();
    skip_ws();
    if (pos_ < text_.size()) fail({"+", "-", "*", "/", "^", "end of input"}, "unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& msg) const {
    throw ParseError(ErrorCode::kSyntax, pos_, std::move(expected), msg);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, std::vector<std::string> expected) {
    if (!accept(c)) fail(std::move(expected), std::string("expected '") + c + "'");
  }

  Expr parse_sum() {
    Expr e = parse_product();
    for (;;) {
      if (accept('+')) {
        e = e + parse_product();
      } else if (accept('-')) {
        e = e - parse_product();
      } else {
        return e;
      }
    }
  }

  Expr parse_product() {
    Expr e = parse_unary();
    for (;;) {
      if (accept('*')) {
        e = e * parse_unary();
      } else if (accept('/')) {
        e = e / parse_unary();
      } else {
        return e;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr e = parse_primary();
    while (accept('^')) {
      const std::size_t at = pos_;
      Expr ex;
      if (accept('-')) {
        ex = -parse_primary();
      } else {
        accept('+');
        ex = parse_primary();
      }
      if (depends_on_coords(ex)) {
        pos_ = at;
        fail({"constant exponent"}, "exponent must not depend on x or y");
      }
      e = Expr::pow(e, ex);
    }
    return e;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail({"number", "identifier", "("}, "unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      expect(')', {")"});
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail({"number", "identifier", "("}, std::string("unexpected character '") + c + "'");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    const char* begin = text_.data() + pos_;
    std::string buf(begin, text_.size() - pos_);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end == buf.c_str()) fail({"number"}, "malformed number");
    pos_ = start + static_cast<std::size_t>(end - buf.c_str());
    return Expr(v);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string id(text_.substr(start, pos_ - start));
    skip_ws();
    const bool call = pos_ < text_.size() && text_[pos_] == '(';
    if (call) {
      static const std::map<std::string, Kind> functions = {
          {"sin", Kind::kSin},   {"cos", Kind::kCos},   {"exp", Kind::kExp},
          {"log", Kind::kLog},   {"sqrt", Kind::kSqrt}, {"tanh", Kind::kTanh},
          {"smoothstep", Kind::kSmoothstep}, {"dsmoothstep", Kind::kDSmoothstep},
      };
      ++pos_;
      if (id == "flatpow") {
        Expr arg = parse_sum();
        expect(',', {","});
        skip_ws();
        const std::size_t at = pos_;
        Expr m = parse_sum();
        if (!m.is_constant() || m.value() != std::floor(m.value()) || m.value() < 0) {
          pos_ = at;
          fail({"non-negative integer"}, "flatpow order must be a non-negative integer");
        }
        expect(')', {")"});
        return Expr::flatpow(arg, static_cast<int>(m.value()));
      }
      auto it = functions.find(id);
      if (it == functions.end()) {
        throw ParseError(ErrorCode::kUnknownIdentifier, start,
                         {"sin", "cos", "exp", "log", "sqrt", "tanh", "smoothstep"},
                         "unknown function '" + id + "'");
      }
      Expr arg = parse_sum();
      expect(')', {")"});
      return Expr::unary(it->second, arg);
    }
    if (id == "x") return Expr::var(Coord::kX);
    if (id == "y") return Expr::var(Coord::kY);
    if (id == "pi") return Expr(std::numbers::pi);
    if (params_.count(id)) return Expr::param(id);
    std::vector<std::string> expected = {"x", "y", "pi"};
    for (const auto& p : params_) expected.push_back(p);
    throw ParseError(ErrorCode::kUnknownIdentifier, start, std::move(expected),
                     "unknown identifier '" + id + "'");
  }

  std::string_view text_;
  const std::set<std::string, std::less<>>& params_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const std::set<std::string, std::less<>>& params) {
  Parser p(text, params);
  return p.parse();
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double eval_tree(const Expr& e, double x, double y, const ParamMap& params,
                 std::unordered_map<const Expr::Node*, double>& memo) {
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  double v = 0.0;
  switch (e.kind()) {
    case Kind::kConst: v = e.value(); break;
    case Kind::kVar: v = e.coord() == Coord::kX ? x : y; break;
    case Kind::kParam: {
      auto it = params.find(e.name());
      if (it == params.end()) {
        throw Error(ErrorCode::kUnknownIdentifier, "unbound parameter '" + e.name() + "'");
      }
      v = it->second;
      break;
    }
    case Kind::kFlatPow:
      v = flatpow_value(eval_tree(e.lhs(), x, y, params, memo), e.order());
      break;
    case Kind::kAdd:
    case Kind::kSub:
    case Kind::kMul:
    case Kind::kDiv:
    case Kind::kPow:
      v = apply_binary(e.kind(), eval_tree(e.lhs(), x, y, params, memo),
                       eval_tree(e.rhs(), x, y, params, memo));
      break;
    default:
      v = apply_unary(e.kind(), eval_tree(e.lhs(), x, y, params, memo), 0);
      break;
  }
  memo.emplace(e.id(), v);
  return v;
}

[[noreturn]] void domain_failure(double x, double y, const std::string& what) {
  std::ostringstream os;
  os.precision(17);
  os << "non-finite value of " << what << " at (" << x << ", " << y << ")";
  throw Error(ErrorCode::kDomain, os.str());
}

}  // namespace

double evaluate(const Expr& e, double x, double y, const ParamMap& params) {
  std::unordered_map<const Expr::Node*, double> memo;
  const double v = eval_tree(e, x, y, params, memo);
  if (!std::isfinite(v)) domain_failure(x, y, to_string(e));
  return v;
}

// ---------------------------------------------------------------------------
// Compiled bundles

namespace {

struct InstrKey {
  Expr::Kind op;
  std::int32_t a;
  std::int32_t b;
  std::uint64_t c;
  int m;
  bool operator==(const InstrKey&) const = default;
};

struct InstrKeyHash {
  std::size_t operator()(const InstrKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.op);
    auto mix = [&h](std::uint64_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    mix(static_cast<std::uint64_t>(k.a));
    mix(static_cast<std::uint64_t>(k.b));
    mix(k.c);
    mix(static_cast<std::uint64_t>(k.m));
    return h;
  }
};

}  // namespace

CompiledBundle::CompiledBundle(std::span<const Expr> outputs) {
  std::unordered_map<const Expr::Node*, std::int32_t> memo;
  std::unordered_map<InstrKey, std::int32_t, InstrKeyHash> cse;

  auto emit = [&](Instr in) -> std::int32_t {
    InstrKey key{in.op, in.a, in.b, std::bit_cast<std::uint64_t>(in.c), in.m};
    if (auto it = cse.find(key); it != cse.end()) return it->second;
    const auto idx = static_cast<std::int32_t>(program_.size());
    program_.push_back(in);
    cse.emplace(key, idx);
    return idx;
  };

  std::function<std::int32_t(const Expr&)> compile = [&](const Expr& e) -> std::int32_t {
    if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
    Instr in;
    in.op = e.kind();
    switch (e.kind()) {
      case Kind::kConst: in.c = e.value(); break;
      case Kind::kVar: in.m = static_cast<int>(e.coord()); break;
      case Kind::kParam:
        throw Error(ErrorCode::kUnknownIdentifier,
                    "cannot compile expression with unbound parameter '" + e.name() + "'");
      case Kind::kPow:
        if (!e.rhs().is_constant()) {
          throw Error(ErrorCode::kInvalidArgument, "cannot compile non-constant exponent");
        }
        in.a = compile(e.lhs());
        in.c = e.rhs().value();
        break;
      case Kind::kAdd:
      case Kind::kSub:
      case Kind::kMul:
      case Kind::kDiv:
        in.a = compile(e.lhs());
        in.b = compile(e.rhs());
        break;
      case Kind::kFlatPow:
        in.a = compile(e.lhs());
        in.m = e.order();
        break;
      default:
        in.a = compile(e.lhs());
        break;
    }
    const std::int32_t idx = emit(in);
    memo.emplace(e.id(), idx);
    return idx;
  };

  for (const auto& e : outputs) {
    outputs_.push_back(compile(e));
    labels_.push_back(to_string(e).substr(0, 200));
  }
}

void CompiledBundle::evaluate(double x, double y, std::span<double> out) const {
  thread_local std::vector<double> regs;
  if (regs.size() < program_.size()) regs.resize(program_.size());
  double* r = regs.data();
  const std::size_t n = program_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Instr& in = program_[i];
    double v;
    switch (in.op) {
      case Kind::kConst: v = in.c; break;
      case Kind::kVar: v = in.m == 0 ? x : y; break;
      case Kind::kAdd: v = r[in.a] + r[in.b]; break;
      case Kind::kSub: v = r[in.a] - r[in.b]; break;
      case Kind::kMul: v = r[in.a] * r[in.b]; break;
      case Kind::kDiv: v = r[in.a] / r[in.b]; break;
      case Kind::kPow: v = apply_pow(r[in.a], in.c); break;
      case Kind::kNeg: v = -r[in.a]; break;
      case Kind::kSin: v = std::sin(r[in.a]); break;
      case Kind::kCos: v = std::cos(r[in.a]); break;
      case Kind::kExp: v = std::exp(r[in.a]); break;
      case Kind::kLog: v = std::log(r[in.a]); break;
      case Kind::kSqrt: v = std::sqrt(r[in.a]); break;
      case Kind::kTanh: v = std::tanh(r[in.a]); break;
      case Kind::kSmoothstep: v = smoothstep_value(r[in.a]); break;
      case Kind::kDSmoothstep: v = smoothstep_derivative(r[in.a]); break;
      case Kind::kFlatPow: v = flatpow_value(r[in.a], in.m); break;
      default: v = std::numeric_limits<double>::quiet_NaN(); break;
    }
    r[i] = v;
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) {
    const double v = r[outputs_[k]];
    if (!std::isfinite(v)) domain_failure(x, y, labels_[k]);
    out[k] = v;
  }
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(Expr e, ParamMap params)
    : expr_(std::move(e)), params_(std::move(params)), bound_(bind_parameters(expr_, params_)) {
  compiled_ = std::make_shared<const CompiledBundle>(std::span<const Expr>(&bound_, 1));
}

ScalarField ScalarField::parse(std::string_view text, const ParamMap& params) {
  std::set<std::string, std::less<>> names;
  for (const auto& [k, v] : params) names.insert(k);
  return ScalarField(mprig::parse(text, names), params);
}

double ScalarField::operator()(double x, double y) const {
  double v = 0.0;
  compiled_->evaluate(x, y, std::span<double>(&v, 1));
  return v;
}

ScalarField ScalarField::derivative(Coord c) const {
  return ScalarField(differentiate(expr_, c), params_);
}

}  // namespace mprig
