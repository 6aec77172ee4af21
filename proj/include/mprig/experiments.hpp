#pragma once

// Experiments over a qualified scenario. Each produces a deterministic report:
// named metrics with thresholds, notes, and CSV tables.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mprig/scenario.hpp"

namespace mprig {

struct Metric {
  std::string name;
  double value = 0.0;
  std::string relation;  // "<=", ">=" or "info"
  double threshold = 0.0;
  bool pass = true;
};

struct Table {
  std::string file;
  std::string csv;
};

class Report {
 public:
  std::string experiment;
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> settings;
  std::vector<Metric> metrics;
  std::vector<std::string> notes;
  std::vector<Table> tables;

  bool passed() const;
  const Metric* find(std::string_view name) const;
  /// Header with experiment, scenario, seed and settings, then one line per metric.
  std::string summary() const;
  /// Writes summary.txt and every table into `dir`, creating it if needed.
  void write(const std::filesystem::path& dir) const;
};

struct RunOptions {
  std::optional<double> k;
  std::optional<double> k2;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
};

std::vector<std::string> experiment_names();

/// Qualifies the scenario at the energies the experiment uses, then runs it.
/// Throws kQualification listing the failed checks, kInvalidArgument for
/// unknown experiments, and rethrows sub-operation errors with context.
Report run_experiment(const Scenario& scenario, const std::string& experiment, const RunOptions& opts = {});

}  // namespace mprig
