#include "mprig/mprig.h"

#include <exception>
#include <fstream>
#include <new>
#include <string>

#include "mprig/action_scatter.hpp"
#include "mprig/convexity.hpp"
#include "mprig/experiments.hpp"

struct mprig_system {
  mprig::MPSystem sys;
};

struct mprig_scenario {
  mprig::Scenario scenario;
  std::string qualification;
};

struct mprig_report {
  mprig::Report report;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

mprig_status fail(mprig_status status, const char* message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
mprig_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MPRIG_OK;
  } catch (const mprig::Error& e) {
    return fail(static_cast<mprig_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MPRIG_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MPRIG_E_INTERNAL, e.what());
  } catch (...) {
    return fail(MPRIG_E_INTERNAL, "unknown exception");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw mprig::Error(mprig::ErrorCode::kInvalidArgument, what);
}

mprig::Vec2 vec(const double* p) { return {p[0], p[1]}; }

void put(mprig::Vec2 v, double* out) {
  out[0] = v.x;
  out[1] = v.y;
}

const char* or_zero(const char* s) { return s ? s : "0"; }

}  // namespace

extern "C" {

const char* mprig_version(void) { return "1.0.0"; }

const char* mprig_status_name(mprig_status status) {
  if (status == MPRIG_OK) return "ok";
  if (status == MPRIG_E_INTERNAL) return "internal";
  if (status < MPRIG_E_INVALID_ARGUMENT || status > MPRIG_E_IO) return "unknown";
  return mprig::to_string(static_cast<mprig::ErrorCode>(status));
}

const char* mprig_last_error(void) { return g_last_error.c_str(); }

mprig_status mprig_system_create(const char* name, const char* g11, const char* g12, const char* g22,
                                 const char* alpha1, const char* alpha2, const char* potential, const char* rho,
                                 mprig_system** out) {
  return guarded([&] {
    require(out && g11 && g22 && rho, "g11, g22, rho and out are required");
    *out = nullptr;
    auto sys = mprig::MPSystem::from_strings(name ? name : "system", g11, or_zero(g12), g22, or_zero(alpha1),
                                             or_zero(alpha2), or_zero(potential), rho);
    *out = new mprig_system{std::move(sys)};
  });
}

void mprig_system_destroy(mprig_system* sys) { delete sys; }

mprig_status mprig_system_maupertuis(const mprig_system* sys, double k, mprig_system** out) {
  return guarded([&] {
    require(sys && out, "null argument");
    *out = nullptr;
    *out = new mprig_system{mprig::maupertuis_metric(sys->sys, k)};
  });
}

mprig_status mprig_energy(const mprig_system* sys, const double x[2], const double xi[2], double* out) {
  return guarded([&] {
    require(sys && x && xi && out, "null argument");
    *out = mprig::energy(sys->sys, vec(x), vec(xi));
  });
}

mprig_status mprig_christoffel(const mprig_system* sys, const double x[2], double out[8]) {
  return guarded([&] {
    require(sys && x && out, "null argument");
    const mprig::Christoffel c = mprig::christoffel(sys->sys, vec(x));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) out[4 * i + 2 * j + k] = c(i, j, k);
  });
}

mprig_status mprig_lorentz_force(const mprig_system* sys, const double x[2], const double xi[2], double out[2]) {
  return guarded([&] {
    require(sys && x && xi && out, "null argument");
    put(mprig::lorentz_force(sys->sys, vec(x), vec(xi)), out);
  });
}

mprig_status mprig_grad_potential(const mprig_system* sys, const double x[2], double out[2]) {
  return guarded([&] {
    require(sys && x && out, "null argument");
    put(mprig::grad_potential(sys->sys, vec(x)), out);
  });
}

mprig_status mprig_boundary_normal(const mprig_system* sys, const double x[2], double out[2]) {
  return guarded([&] {
    require(sys && x && out, "null argument");
    put(mprig::boundary_normal(sys->sys, vec(x)), out);
  });
}

mprig_status mprig_boundary_point(const mprig_system* sys, double angle, double out[2]) {
  return guarded([&] {
    require(sys && out, "null argument");
    put(mprig::boundary_point(sys->sys, angle), out);
  });
}

mprig_status mprig_exit_time(const mprig_system* sys, double k, const double x[2], const double xi[2],
                             double* tau) {
  return guarded([&] {
    require(sys && x && xi && tau, "null argument");
    *tau = mprig::exit_time(sys->sys, vec(x), vec(xi), k);
  });
}

mprig_status mprig_scattering(const mprig_system* sys, double k, const double x[2], const double xi[2], double y[2],
                              double eta[2], double* tau) {
  return guarded([&] {
    require(sys && x && xi && y && eta, "null argument");
    const mprig::ScatterRecord r = mprig::scattering(sys->sys, k, vec(x), vec(xi));
    put(r.y, y);
    put(r.eta, eta);
    if (tau) *tau = r.tau.value_or(0.0);
  });
}

mprig_status mprig_mp_exp(const mprig_system* sys, double k, const double x[2], const double xi[2], double t,
                          double out[2]) {
  return guarded([&] {
    require(sys && x && xi && out, "null argument");
    put(mprig::mp_exp(sys->sys, vec(x), k, t, vec(xi)), out);
  });
}

mprig_status mprig_boundary_action(const mprig_system* sys, double k, const double x[2], const double y[2],
                                   double* action, double* time) {
  return guarded([&] {
    require(sys && x && y && action, "null argument");
    const mprig::ActionResult r = mprig::boundary_action(sys->sys, k, vec(x), vec(y));
    *action = r.value;
    if (time) *time = r.time;
  });
}

mprig_status mprig_convexity_margin(const mprig_system* sys, double k, const double x[2], const double v[2],
                                    double* out) {
  return guarded([&] {
    require(sys && x && v && out, "null argument");
    *out = mprig::mp_convexity_margin(sys->sys, k, vec(x), vec(v));
  });
}

mprig_status mprig_trajectory_csv(const mprig_system* sys, double k, const double x[2], const double xi[2],
                                  const char* path) {
  return guarded([&] {
    require(sys && x && xi && path, "null argument");
    const mprig::Trajectory t = mprig::integrate(sys->sys, vec(x), vec(xi), k, mprig::Stop::exit());
    std::ofstream out(path);
    if (!out) throw mprig::Error(mprig::ErrorCode::kIo, std::string("cannot open ") + path);
    t.write_csv(out, sys->sys);
    if (!out) throw mprig::Error(mprig::ErrorCode::kIo, std::string("cannot write ") + path);
  });
}

size_t mprig_builtin_count(void) { return mprig::builtin_scenarios().size(); }

const char* mprig_builtin_name(size_t index) {
  static const std::vector<std::string> names = mprig::builtin_scenarios();
  return index < names.size() ? names[index].c_str() : nullptr;
}

size_t mprig_experiment_count(void) { return mprig::experiment_names().size(); }

const char* mprig_experiment_name(size_t index) {
  static const std::vector<std::string> names = mprig::experiment_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

mprig_status mprig_scenario_load(const char* name_or_path, mprig_scenario** out) {
  return guarded([&] {
    require(name_or_path && out, "null argument");
    *out = nullptr;
    *out = new mprig_scenario{mprig::load_scenario(name_or_path), {}};
  });
}

void mprig_scenario_destroy(mprig_scenario* scenario) { delete scenario; }

const char* mprig_scenario_name(const mprig_scenario* scenario) {
  return scenario ? scenario->scenario.name.c_str() : nullptr;
}

mprig_status mprig_scenario_qualify(mprig_scenario* scenario, int* passed, const char** text) {
  return guarded([&] {
    require(scenario && passed, "null argument");
    const mprig::Qualification q = mprig::qualify(scenario->scenario);
    scenario->qualification = q.text();
    *passed = q.passed() ? 1 : 0;
    if (text) *text = scenario->qualification.c_str();
  });
}

void mprig_run_options_init(mprig_run_options* opts) {
  if (opts) *opts = mprig_run_options{0, 0.0, 0, 0.0, 0, 0, 0};
}

mprig_status mprig_run_experiment(const mprig_scenario* scenario, const char* experiment,
                                  const mprig_run_options* opts, mprig_report** out) {
  return guarded([&] {
    require(scenario && experiment && out, "null argument");
    *out = nullptr;
    mprig::RunOptions o;
    if (opts) {
      if (opts->has_k) o.k = opts->k;
      if (opts->has_k2) o.k2 = opts->k2;
      if (opts->samples != 0) o.samples = opts->samples;
      if (opts->has_seed) o.seed = opts->seed;
    }
    mprig::Report r = mprig::run_experiment(scenario->scenario, experiment, o);
    std::string summary = r.summary();
    *out = new mprig_report{std::move(r), std::move(summary)};
  });
}

void mprig_report_destroy(mprig_report* report) { delete report; }

int mprig_report_passed(const mprig_report* report) { return report && report->report.passed() ? 1 : 0; }

const char* mprig_report_summary(const mprig_report* report) { return report ? report->summary.c_str() : nullptr; }

size_t mprig_report_metric_count(const mprig_report* report) {
  return report ? report->report.metrics.size() : 0;
}

mprig_status mprig_report_metric(const mprig_report* report, size_t index, const char** name, double* value,
                                 const char** relation, double* threshold, int* pass) {
  return guarded([&] {
    require(report && index < report->report.metrics.size(), "metric index out of range");
    const mprig::Metric& m = report->report.metrics[index];
    if (name) *name = m.name.c_str();
    if (value) *value = m.value;
    if (relation) *relation = m.relation.c_str();
    if (threshold) *threshold = m.threshold;
    if (pass) *pass = m.pass ? 1 : 0;
  });
}

mprig_status mprig_report_write(const mprig_report* report, const char* dir) {
  return guarded([&] {
    require(report && dir, "null argument");
    report->report.write(dir);
  });
}

}  // extern "C"

static_assert(static_cast<int>(MPRIG_E_INVALID_ARGUMENT) == static_cast<int>(mprig::ErrorCode::kInvalidArgument));
static_assert(static_cast<int>(MPRIG_E_NO_CONVERGENCE) == static_cast<int>(mprig::ErrorCode::kNoConvergence));
static_assert(static_cast<int>(MPRIG_E_IO) == static_cast<int>(mprig::ErrorCode::kIo));
