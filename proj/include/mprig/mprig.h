#ifndef MPRIG_MPRIG_H
#define MPRIG_MPRIG_H

/* C interface to the MP-system library. Every fallible call returns an
 * mprig_status; on failure mprig_last_error() holds a message for the calling
 * thread. Handles are opaque and owned by the caller, who releases them with
 * the matching _destroy function. Points and vectors are double[2] in chart
 * coordinates. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MPRIG_API __declspec(dllexport)
#else
#define MPRIG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mprig_status {
  MPRIG_OK = 0,
  MPRIG_E_INVALID_ARGUMENT = 1,
  MPRIG_E_SYNTAX,
  MPRIG_E_UNKNOWN_IDENTIFIER,
  MPRIG_E_DOMAIN,
  MPRIG_E_SINGULAR_METRIC,
  MPRIG_E_ENERGY_LEVEL,
  MPRIG_E_DEGENERATE_GRADIENT,
  MPRIG_E_NOT_TANGENT,
  MPRIG_E_NON_CONVEX,
  MPRIG_E_STEP_UNDERFLOW,
  MPRIG_E_ENERGY_DRIFT,
  MPRIG_E_NO_EXIT,
  MPRIG_E_LEFT_DOMAIN,
  MPRIG_E_NO_CONVERGENCE,
  MPRIG_E_QUADRATURE,
  MPRIG_E_EXTRAPOLATION,
  MPRIG_E_NOT_INVERTIBLE,
  MPRIG_E_CONFIG,
  MPRIG_E_QUALIFICATION,
  MPRIG_E_IO,
  MPRIG_E_INTERNAL = 100
} mprig_status;

typedef struct mprig_system mprig_system;
typedef struct mprig_scenario mprig_scenario;
typedef struct mprig_report mprig_report;

MPRIG_API const char* mprig_version(void);
MPRIG_API const char* mprig_status_name(mprig_status status);
/* Message of the last failed call on this thread; "" if none. */
MPRIG_API const char* mprig_last_error(void);

/* --- systems ------------------------------------------------------------ */

/* Expression strings in x, y. NULL for g12, alpha1, alpha2 or U means 0. */
MPRIG_API mprig_status mprig_system_create(const char* name, const char* g11, const char* g12, const char* g22,
                                           const char* alpha1, const char* alpha2, const char* potential,
                                           const char* rho, mprig_system** out);
MPRIG_API void mprig_system_destroy(mprig_system* sys);
/* (2(k - U) g, alpha) with zero potential. */
MPRIG_API mprig_status mprig_system_maupertuis(const mprig_system* sys, double k, mprig_system** out);

MPRIG_API mprig_status mprig_energy(const mprig_system* sys, const double x[2], const double xi[2], double* out);
/* out[4 i + 2 j + k] = Gamma^i_{jk} */
MPRIG_API mprig_status mprig_christoffel(const mprig_system* sys, const double x[2], double out[8]);
MPRIG_API mprig_status mprig_lorentz_force(const mprig_system* sys, const double x[2], const double xi[2],
                                           double out[2]);
MPRIG_API mprig_status mprig_grad_potential(const mprig_system* sys, const double x[2], double out[2]);
/* Inward g-unit normal at a boundary point. */
MPRIG_API mprig_status mprig_boundary_normal(const mprig_system* sys, const double x[2], double out[2]);
MPRIG_API mprig_status mprig_boundary_point(const mprig_system* sys, double angle, double out[2]);

/* xi is rescaled onto the energy level k. */
MPRIG_API mprig_status mprig_exit_time(const mprig_system* sys, double k, const double x[2], const double xi[2],
                                       double* tau);
MPRIG_API mprig_status mprig_scattering(const mprig_system* sys, double k, const double x[2], const double xi[2],
                                        double y[2], double eta[2], double* tau);
MPRIG_API mprig_status mprig_mp_exp(const mprig_system* sys, double k, const double x[2], const double xi[2],
                                    double t, double out[2]);
/* Boundary action A(x, y) at energy k; `time` may be NULL. */
MPRIG_API mprig_status mprig_boundary_action(const mprig_system* sys, double k, const double x[2],
                                             const double y[2], double* action, double* time);
MPRIG_API mprig_status mprig_convexity_margin(const mprig_system* sys, double k, const double x[2],
                                              const double v[2], double* out);
/* Integrates to the exit and writes t,x,y,xi1,xi2,energy rows to `path`. */
MPRIG_API mprig_status mprig_trajectory_csv(const mprig_system* sys, double k, const double x[2],
                                            const double xi[2], const char* path);

/* --- scenarios and experiments --------------------------------------------- */

MPRIG_API size_t mprig_builtin_count(void);
MPRIG_API const char* mprig_builtin_name(size_t index);
MPRIG_API size_t mprig_experiment_count(void);
MPRIG_API const char* mprig_experiment_name(size_t index);

/* A built-in name or a path to a scenario file. */
MPRIG_API mprig_status mprig_scenario_load(const char* name_or_path, mprig_scenario** out);
MPRIG_API void mprig_scenario_destroy(mprig_scenario* scenario);
MPRIG_API const char* mprig_scenario_name(const mprig_scenario* scenario);
/* `text` stays valid until the next call on this scenario or its destruction. */
MPRIG_API mprig_status mprig_scenario_qualify(mprig_scenario* scenario, int* passed, const char** text);

typedef struct mprig_run_options {
  int has_k;
  double k;
  int has_k2;
  double k2;
  int samples; /* 0: experiment default */
  int has_seed;
  uint64_t seed;
} mprig_run_options;

MPRIG_API void mprig_run_options_init(mprig_run_options* opts);
/* opts may be NULL. */
MPRIG_API mprig_status mprig_run_experiment(const mprig_scenario* scenario, const char* experiment,
                                            const mprig_run_options* opts, mprig_report** out);
MPRIG_API void mprig_report_destroy(mprig_report* report);
MPRIG_API int mprig_report_passed(const mprig_report* report);
MPRIG_API const char* mprig_report_summary(const mprig_report* report);
MPRIG_API size_t mprig_report_metric_count(const mprig_report* report);
/* Any output pointer may be NULL. `relation` is "<=", ">=" or "info". */
MPRIG_API mprig_status mprig_report_metric(const mprig_report* report, size_t index, const char** name,
                                           double* value, const char** relation, double* threshold, int* pass);
/* summary.txt plus CSV tables into `dir`, created if missing. */
MPRIG_API mprig_status mprig_report_write(const mprig_report* report, const char* dir);

#ifdef __cplusplus
}
#endif

#endif
