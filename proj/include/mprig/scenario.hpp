#pragma once

// Scenario files: named MP-systems, energies, sample counts and tolerance
// overrides in a line-oriented INI-like format.
//
//   name = counterexample-basic
//   [parameters]
//   B = 0.3
//   [system]
//   name = quarter
//   g11 = 0.25
//   ...
//   [system]
//   role = reference
//   ...
//   [energies]
//   k = 3
//   [sampling]
//   boundary = 64
//   [tolerances]
//   max_action_gap = 1e-6
//
// '#' starts a comment. Expression values may use any parameter declared in
// [parameters] above them.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mprig/geometry.hpp"

namespace mprig {

struct SystemSpec {
  std::string name;
  /// "primary" systems are the subjects of experiments; a "reference" system is
  /// the magnetic system both primaries are expected to reduce to.
  std::string role = "primary";
  std::string g11, g12 = "0", g22, alpha1 = "0", alpha2 = "0", potential = "0", rho;
};

struct Sampling {
  int boundary = 64;       // boundary points for sweeps
  int pairs = 24;          // boundary points for pair tables
  int trajectories = 100;  // random starts
  std::uint64_t seed = 7;
};

class Scenario {
 public:
  std::string name;
  std::string origin;  // file path or "builtin"
  ParamMap parameters;
  std::vector<SystemSpec> specs;
  std::vector<double> energies;
  Sampling sampling;
  std::map<std::string, double, std::less<>> tolerances;

  /// Builds the systems; throws kConfig with the failing system name.
  void bind();

  const std::vector<MPSystem>& primaries() const { return primaries_; }
  const MPSystem* reference() const { return reference_.empty() ? nullptr : &reference_.front(); }
  double tolerance(std::string_view metric, double fallback) const;

 private:
  std::vector<MPSystem> primaries_;
  std::vector<MPSystem> reference_;
};

/// Throws kConfig with "<origin>:<line>: ..." on malformed input.
Scenario parse_scenario(std::string_view text, const std::string& origin = "<string>");

/// Built-in name or path to a scenario file; the result is bound.
Scenario load_scenario(const std::string& name_or_path);

std::vector<std::string> builtin_scenarios();
/// Scenario file text of a built-in; throws kConfig for unknown names.
std::string builtin_scenario_text(const std::string& name);

struct Check {
  std::string name;
  double value = 0.0;
  bool pass = false;
  std::string detail;
};

struct Qualification {
  std::vector<Check> checks;
  bool passed() const;
  std::string text() const;
};

/// Positive-definiteness and k > U on domain samples and strictly positive
/// MP-convexity margins on sampling.boundary boundary points, for every
/// primary system at every energy in `energies` (scenario energies if empty).
Qualification qualify(const Scenario& s, std::vector<double> energies = {});

}  // namespace mprig
