// mprig: qualify scenarios and run experiments through the C API.
//
// Exit status: 0 if every check passed, 1 if a check failed, 2 on errors.

#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mprig/mprig.h"

namespace {

constexpr int kChecksFailed = 1;
constexpr int kError = 2;

struct ScenarioDeleter {
  void operator()(mprig_scenario* s) const { mprig_scenario_destroy(s); }
};
struct ReportDeleter {
  void operator()(mprig_report* r) const { mprig_report_destroy(r); }
};
using ScenarioPtr = std::unique_ptr<mprig_scenario, ScenarioDeleter>;
using ReportPtr = std::unique_ptr<mprig_report, ReportDeleter>;

int report_error(mprig_status status) {
  std::fprintf(stderr, "mprig: %s: %s\n", mprig_status_name(status), mprig_last_error());
  return kError;
}

std::optional<ScenarioPtr> load(const std::string& name, int& code) {
  mprig_scenario* raw = nullptr;
  if (const mprig_status st = mprig_scenario_load(name.c_str(), &raw); st != MPRIG_OK) {
    code = report_error(st);
    return std::nullopt;
  }
  return ScenarioPtr(raw);
}

int qualify(const std::string& name) {
  int code = 0;
  auto scenario = load(name, code);
  if (!scenario) return code;
  int passed = 0;
  const char* text = nullptr;
  if (const mprig_status st = mprig_scenario_qualify(scenario->get(), &passed, &text); st != MPRIG_OK) {
    return report_error(st);
  }
  std::printf("%s", text);
  std::printf("%s: %s\n", mprig_scenario_name(scenario->get()), passed ? "qualified" : "NOT qualified");
  return passed ? 0 : kChecksFailed;
}

struct RunArgs {
  std::string scenario;
  std::string experiment;
  std::optional<double> k;
  std::optional<double> k2;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run(const RunArgs& a) {
  int code = 0;
  auto scenario = load(a.scenario, code);
  if (!scenario) return code;

  mprig_run_options opts;
  mprig_run_options_init(&opts);
  if (a.k) {
    opts.has_k = 1;
    opts.k = *a.k;
  }
  if (a.k2) {
    opts.has_k2 = 1;
    opts.k2 = *a.k2;
  }
  if (a.samples) opts.samples = *a.samples;
  if (a.seed) {
    opts.has_seed = 1;
    opts.seed = *a.seed;
  }

  mprig_report* raw = nullptr;
  if (const mprig_status st = mprig_run_experiment(scenario->get(), a.experiment.c_str(), &opts, &raw);
      st != MPRIG_OK) {
    return report_error(st);
  }
  ReportPtr report(raw);
  std::printf("%s", mprig_report_summary(report.get()));

  const std::string dir =
      a.out.empty() ? "mprig-out/" + std::string(mprig_scenario_name(scenario->get())) + "/" + a.experiment : a.out;
  if (const mprig_status st = mprig_report_write(report.get(), dir.c_str()); st != MPRIG_OK) {
    return report_error(st);
  }
  std::printf("report written to %s\n", dir.c_str());
  return mprig_report_passed(report.get()) ? 0 : kChecksFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary data of magnetic systems with potential"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mprig_version()));

  auto* list = app.add_subcommand("list-scenarios", "List built-in scenarios");
  auto* list_exp = app.add_subcommand("list-experiments", "List experiments");

  std::string qualify_name;
  auto* qual = app.add_subcommand("qualify", "Run the qualification checks of a scenario");
  qual->add_option("scenario", qualify_name, "Built-in name or scenario file")->required();

  RunArgs args;
  auto* runner = app.add_subcommand("run", "Run one experiment and write its report");
  runner->add_option("scenario", args.scenario, "Built-in name or scenario file")->required();
  runner->add_option("--exp", args.experiment, "Experiment name (see list-experiments)")->required();
  runner->add_option("--k", args.k, "Energy level (default: first scenario energy)");
  runner->add_option("--k2", args.k2, "Second energy for boundary-recovery");
  runner->add_option("--samples", args.samples, "Sample count override")->check(CLI::PositiveNumber);
  runner->add_option("--seed", args.seed, "RNG seed (default: scenario seed)");
  runner->add_option("--out", args.out, "Report directory (default: mprig-out/<scenario>/<experiment>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kError;
  }

  if (*list) {
    for (std::size_t i = 0; i < mprig_builtin_count(); ++i) std::printf("%s\n", mprig_builtin_name(i));
    return 0;
  }
  if (*list_exp) {
    for (std::size_t i = 0; i < mprig_experiment_count(); ++i) std::printf("%s\n", mprig_experiment_name(i));
    return 0;
  }
  if (*qual) return qualify(qualify_name);
  return run(args);
}
