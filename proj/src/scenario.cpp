#include "mprig/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mprig/convexity.hpp"

namespace mprig {

namespace {

// --- built-ins ---------------------------------------------------------------

constexpr const char* kBaseHeader = R"(
[parameters]
B = 0.3
)";

struct Builtin {
  const char* name;
  const char* body;
};

const Builtin kBuiltins[] = {
    {"euclid-disk", R"(
[system]
name = flat
g11 = 1
g22 = 1
rho = 0.5*(1 - x^2 - y^2)
[energies]
k = 0.5, 1
)"},
    {"magnetic-disk", R"(
[system]
name = magnetic
g11 = 1
g22 = 1
alpha1 = -B/2*y
alpha2 = B/2*x
rho = 0.5*(1 - x^2 - y^2)
[energies]
k = 0.5, 1
)"},
    {"potential-disk", R"(
[system]
name = potential
g11 = 1
g22 = 1
U = 0.2*(x^2 + y^2)
rho = 0.5*(1 - x^2 - y^2)
[energies]
k = 1
)"},
    {"mp-quadratic", R"(
[system]
name = quadratic
g11 = 1
g22 = 1
alpha1 = -B/2*y
alpha2 = B/2*x
U = 0.2*(x^2 + y^2)
rho = 0.5*(1 - x^2 - y^2)
[energies]
k = 1
)"},
    {"mp-warped", R"(
[system]
name = warped
g11 = 1 + 0.1*y^2
g12 = 0.05*x*y
g22 = 1 + 0.1*x^2
alpha1 = -B/2*y
alpha2 = B/2*x + 0.05*x^2
U = 0.3*x + 0.1*y^2
rho = 0.5*(1 - x^2 - y^2)
[energies]
k = 1
)"},
    // (g/4, alpha, 1) and (g/2, alpha, 2) both reduce to (g, alpha) at k = 3.
    {"counterexample-basic", R"(
[system]
name = quarter
g11 = 0.25
g22 = 0.25
alpha1 = -B/2*y
alpha2 = B/2*x
U = 1
rho = 0.5*(1 - x^2 - y^2)
[system]
name = half
g11 = 0.5
g22 = 0.5
alpha1 = -B/2*y
alpha2 = B/2*x
U = 2
rho = 0.5*(1 - x^2 - y^2)
[system]
name = base
role = reference
g11 = 1
g22 = 1
alpha1 = -B/2*y
alpha2 = B/2*x
rho = 0.5*(1 - x^2 - y^2)
[energies]
k = 3
)"},
    // phi = 1 + beta/2 and psi = 1 - beta/4 with beta a collar on 0.9 <= |x| <= 1,
    // written in |x|^2; metrics g / (2(3 - phi)) and g / (2(3 - 2 psi)).
    {"counterexample-collar", R"(
[system]
name = phi
g11 = 1/(2*(3 - (1 + 0.5*smoothstep((x^2 + y^2 - 0.81)/0.19))))
g22 = 1/(2*(3 - (1 + 0.5*smoothstep((x^2 + y^2 - 0.81)/0.19))))
alpha1 = -B/2*y
alpha2 = B/2*x
U = 1 + 0.5*smoothstep((x^2 + y^2 - 0.81)/0.19)
rho = 0.5*(1 - x^2 - y^2)
[system]
name = psi
g11 = 1/(2*(3 - 2*(1 - 0.25*smoothstep((x^2 + y^2 - 0.81)/0.19))))
g22 = 1/(2*(3 - 2*(1 - 0.25*smoothstep((x^2 + y^2 - 0.81)/0.19))))
alpha1 = -B/2*y
alpha2 = B/2*x
U = 2*(1 - 0.25*smoothstep((x^2 + y^2 - 0.81)/0.19))
rho = 0.5*(1 - x^2 - y^2)
[system]
name = base
role = reference
g11 = 1
g22 = 1
alpha1 = -B/2*y
alpha2 = B/2*x
rho = 0.5*(1 - x^2 - y^2)
[energies]
k = 3
)"},
};

// --- parsing -------------------------------------------------------------------

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

class Parser {
 public:
  Parser(std::string_view text, const std::string& origin) : text_(text), origin_(origin) {}

  Scenario run() {
    scenario_.origin = origin_;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      ++line_;
      const auto end = std::min(text_.find('\n', pos), text_.size());
      std::string_view raw = text_.substr(pos, end - pos);
      pos = end + 1;
      if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      const std::string_view line = trim(raw);
      if (line.empty()) continue;
      if (line.front() == '[') {
        section(line);
      } else {
        assignment(line);
      }
    }
    line_ = 0;
    finish();
    return std::move(scenario_);
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    std::ostringstream os;
    os << origin_;
    if (line_ > 0) os << ':' << line_;
    os << ": " << message;
    throw Error(ErrorCode::kConfig, os.str());
  }

  void section(std::string_view line) {
    if (line.back() != ']') fail("unterminated section header");
    const std::string name(trim(line.substr(1, line.size() - 2)));
    static const char* const kKnown[] = {"parameters", "system", "energies", "sampling", "tolerances"};
    if (std::find(std::begin(kKnown), std::end(kKnown), name) == std::end(kKnown)) {
      fail("unknown section [" + name + "]");
    }
    section_ = name;
    if (name == "system") {
      scenario_.specs.emplace_back();
      system_lines_.push_back(line_);
    }
  }

  double number(std::string_view text) const {
    const std::string s(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
      fail("expected a number, got '" + s + "'");
    }
    return v;
  }

  int count(std::string_view text) const {
    const double v = number(text);
    if (v < 1 || v != std::floor(v) || v > 1e7) fail("expected a positive integer");
    return static_cast<int>(v);
  }

  std::string expression(std::string_view text) const {
    std::set<std::string, std::less<>> names;
    for (const auto& [k, v] : scenario_.parameters) names.insert(k);
    try {
      (void)parse(text, names);
    } catch (const Error& e) {
      fail(std::string("invalid expression: ") + e.what());
    }
    return std::string(text);
  }

  void assignment(std::string_view line) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) fail("missing key");
    if (value.empty()) fail("missing value for '" + key + "'");

    if (section_.empty()) {
      if (key != "name") fail("only 'name' may appear before the first section");
      scenario_.name = std::string(value);
    } else if (section_ == "parameters") {
      const bool ident = std::isalpha(static_cast<unsigned char>(key[0])) &&
                         std::all_of(key.begin(), key.end(), [](char c) {
                           return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
                         });
      if (!ident || key == "x" || key == "y" || key == "pi") fail("invalid parameter name '" + key + "'");
      scenario_.parameters[key] = number(value);
    } else if (section_ == "system") {
      system_key(scenario_.specs.back(), key, value);
    } else if (section_ == "energies") {
      if (key != "k") fail("[energies] accepts only 'k'");
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        scenario_.energies.push_back(number(trim(rest.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
    } else if (section_ == "sampling") {
      Sampling& s = scenario_.sampling;
      if (key == "boundary") {
        s.boundary = count(value);
      } else if (key == "pairs") {
        s.pairs = count(value);
      } else if (key == "trajectories") {
        s.trajectories = count(value);
      } else if (key == "seed") {
        const double v = number(value);
        if (v < 0 || v != std::floor(v) || v > 9.007199254740992e15) fail("seed must be a non-negative integer");
        s.seed = static_cast<std::uint64_t>(v);
      } else {
        fail("unknown sampling key '" + key + "'");
      }
    } else if (section_ == "tolerances") {
      const double v = number(value);
      if (!(v > 0.0)) fail("tolerance must be positive");
      scenario_.tolerances[key] = v;
    }
  }

  void system_key(SystemSpec& s, const std::string& key, std::string_view value) {
    if (key == "name") {
      s.name = std::string(value);
    } else if (key == "role") {
      if (value != "primary" && value != "reference") fail("role must be 'primary' or 'reference'");
      s.role = std::string(value);
    } else if (key == "g11") {
      s.g11 = expression(value);
    } else if (key == "g12") {
      s.g12 = expression(value);
    } else if (key == "g22") {
      s.g22 = expression(value);
    } else if (key == "alpha1") {
      s.alpha1 = expression(value);
    } else if (key == "alpha2") {
      s.alpha2 = expression(value);
    } else if (key == "U") {
      s.potential = expression(value);
    } else if (key == "rho") {
      s.rho = expression(value);
    } else {
      fail("unknown system key '" + key + "'");
    }
  }

  void finish() {
    if (scenario_.name.empty()) fail("missing 'name'");
    if (scenario_.specs.empty()) fail("no [system] section");
    int references = 0;
    for (std::size_t i = 0; i < scenario_.specs.size(); ++i) {
      SystemSpec& s = scenario_.specs[i];
      line_ = system_lines_[i];
      if (s.name.empty()) s.name = "system" + std::to_string(i + 1);
      if (s.g11.empty() || s.g22.empty()) fail("system '" + s.name + "' needs g11 and g22");
      if (s.rho.empty()) fail("system '" + s.name + "' needs rho");
      if (s.role == "reference") ++references;
    }
    line_ = 0;
    if (references > 1) fail("at most one reference system");
    if (references == static_cast<int>(scenario_.specs.size())) fail("no primary system");
    if (scenario_.energies.empty()) fail("no energies");
  }

  std::string_view text_;
  const std::string& origin_;
  Scenario scenario_;
  std::string section_;
  std::vector<int> system_lines_;
  int line_ = 0;
};

}  // namespace

void Scenario::bind() {
  primaries_.clear();
  reference_.clear();
  for (const SystemSpec& s : specs) {
    try {
      MPSystem sys = MPSystem::from_strings(s.name, s.g11, s.g12, s.g22, s.alpha1, s.alpha2, s.potential, s.rho,
                                            parameters);
      (s.role == "reference" ? reference_ : primaries_).push_back(std::move(sys));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, name + ": system '" + s.name + "': " + e.what());
    }
  }
}

double Scenario::tolerance(std::string_view metric, double fallback) const {
  const auto it = tolerances.find(metric);
  return it == tolerances.end() ? fallback : it->second;
}

Scenario parse_scenario(std::string_view text, const std::string& origin) {
  return Parser(text, origin).run();
}

std::vector<std::string> builtin_scenarios() {
  std::vector<std::string> names;
  for (const Builtin& b : kBuiltins) names.emplace_back(b.name);
  return names;
}

std::string builtin_scenario_text(const std::string& name) {
  for (const Builtin& b : kBuiltins) {
    if (name == b.name) return "name = " + name + "\n" + kBaseHeader + b.body;
  }
  throw Error(ErrorCode::kConfig, "unknown built-in scenario '" + name + "'");
}

Scenario load_scenario(const std::string& name_or_path) {
  const auto names = builtin_scenarios();
  Scenario s;
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    s = parse_scenario(builtin_scenario_text(name_or_path), "builtin:" + name_or_path);
  } else {
    std::ifstream in(name_or_path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open scenario '" + name_or_path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    s = parse_scenario(text.str(), name_or_path);
  }
  s.bind();
  return s;
}

// --- qualification ---------------------------------------------------------------

bool Qualification::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string Qualification::text() const {
  std::ostringstream os;
  char line[512];
  for (const Check& c : checks) {
    std::snprintf(line, sizeof line, "%-4s %-44s %12.5e  %s\n", c.pass ? "ok" : "FAIL", c.name.c_str(), c.value,
                  c.detail.c_str());
    os << line;
  }
  return os.str();
}

namespace {

bool qualify_metric(const MPSystem& sys, Qualification& q) {
  double min_det = INFINITY;
  for (const Vec2& p : domain_samples(sys)) {
    const Sym2 g = sys.metric(p);
    min_det = std::min(min_det, g.positive_definite() ? g.det() : -std::abs(g.det()));
  }
  q.checks.push_back({sys.name() + ": metric positive definite", min_det, min_det > 0.0,
                      "min det g over domain samples"});
  return min_det > 0.0;
}

void qualify_energy(const MPSystem& sys, double k, int n_boundary, Qualification& q) {
  double min_gap = INFINITY;
  for (const Vec2& p : domain_samples(sys)) min_gap = std::min(min_gap, k - sys.potential(p));
  char label[160];
  std::snprintf(label, sizeof label, "%s: k=%g exceeds U", sys.name().c_str(), k);
  q.checks.push_back({label, min_gap, min_gap > 0.0, "min k - U over domain samples"});
  if (!(min_gap > 0.0)) return;

  std::snprintf(label, sizeof label, "%s: k=%g strictly MP-convex", sys.name().c_str(), k);
  try {
    double margin = INFINITY;
    for (const ConvexitySample& s : convexity_sweep(sys, k, n_boundary)) margin = std::min(margin, s.min_mp());
    q.checks.push_back({label, margin, margin > 0.0, "min margin over boundary samples"});
  } catch (const Error& e) {
    q.checks.push_back({label, NAN, false, e.what()});
  }
}

}  // namespace

Qualification qualify(const Scenario& s, std::vector<double> energies) {
  if (energies.empty()) energies = s.energies;
  Qualification q;
  for (const MPSystem& sys : s.primaries()) {
    if (!qualify_metric(sys, q)) continue;
    for (double k : energies) qualify_energy(sys, k, s.sampling.boundary, q);
  }
  if (const MPSystem* ref = s.reference()) {
    if (qualify_metric(*ref, q)) qualify_energy(*ref, 0.5, s.sampling.boundary, q);
  }
  return q;
}

}  // namespace mprig
