/* C interface to the dfo library.
 *
 * Every function that can fail returns a dfo_status. On failure a message
 * describing the error is available from dfo_last_error() until the next
 * call on the same thread. Handles are opaque and must be released with the
 * matching free function. Matrices are passed row-major.
 */
#ifndef DFO_H
#define DFO_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DFO_API __declspec(dllexport)
#else
#define DFO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as the exit codes of the dfo command-line tool. */
typedef enum dfo_status {
  DFO_OK = 0,
  DFO_ERR_USAGE = 1,
  DFO_ERR_CONFIG = 2,
  DFO_ERR_FIT = 3,
  DFO_ERR_INTEGRATION = 4,
  DFO_ERR_IO = 5,
  DFO_ERR_INPUT = 6,
  DFO_ERR_NUMERICAL = 7,
  DFO_ERR_INTERNAL = 8
} dfo_status;

DFO_API const char* dfo_version(void);
DFO_API const char* dfo_last_error(void);
DFO_API const char* dfo_status_name(dfo_status status);

/* ------------------------------------------------------------------------ */
/* Experiments */

typedef struct dfo_experiment dfo_experiment;

typedef struct dfo_run_summary {
  uint64_t steps;
  uint64_t rows;
  double t_final;
  double final_error;
  double max_error;
  double mean_error;
  int64_t final_rank;
} dfo_run_summary;

/* The loaders apply the DFO_SEED environment override. */
DFO_API dfo_status dfo_experiment_load_file(const char* path, dfo_experiment** out);
DFO_API dfo_status dfo_experiment_load_preset(const char* name, dfo_experiment** out);
DFO_API dfo_status dfo_experiment_load_string(const char* toml, dfo_experiment** out);
DFO_API void dfo_experiment_free(dfo_experiment* experiment);

DFO_API dfo_status dfo_experiment_set_output_dir(dfo_experiment* experiment, const char* dir);
DFO_API dfo_status dfo_experiment_output_dir(const dfo_experiment* experiment, char* buffer, size_t capacity,
                                             size_t* needed);
DFO_API dfo_status dfo_experiment_param_count(const dfo_experiment* experiment, size_t* out);

/* Writes the resolved configuration as TOML. When buffer is too small
 * (including the terminating zero) nothing is written, *needed receives the
 * required size and DFO_ERR_USAGE is returned. */
DFO_API dfo_status dfo_experiment_config_toml(const dfo_experiment* experiment, char* buffer, size_t capacity,
                                              size_t* needed);

/* Fits the initial parameters, integrates and writes metrics.csv and
 * theta_final.txt to the output directory. */
DFO_API dfo_status dfo_experiment_run(dfo_experiment* experiment, dfo_run_summary* summary);

/* Fits the initial parameters only and writes theta_initial.txt. */
DFO_API dfo_status dfo_experiment_fit(dfo_experiment* experiment, double* final_loss, uint64_t* iterations);

/* Runs every config and writes <output_dir>/compare.csv. */
DFO_API dfo_status dfo_compare(const char* const* config_paths, size_t count, const char* output_dir);

/* ------------------------------------------------------------------------ */
/* Presets */

DFO_API size_t dfo_preset_count(void);
/* NULL when index is out of range. */
DFO_API const char* dfo_preset_name(size_t index);
/* NULL for an unknown name. The string is owned by the library. */
DFO_API const char* dfo_preset_toml(const char* name);

/* ------------------------------------------------------------------------ */
/* Least squares */

/* Minimal-norm solution of min |J eta - f| with singular values below
 * max(abs_tol, eps_rel * sigma_max) discarded. J is n x p. */
DFO_API dfo_status dfo_solve_min_norm(const double* jacobian, size_t n, size_t p, const double* f, double eps_rel,
                                      double abs_tol, double* eta, size_t* rank);

/* (J^T J + gamma I)^{-1} J^T f. */
DFO_API dfo_status dfo_solve_tikhonov(const double* jacobian, size_t n, size_t p, const double* f, double gamma,
                                      double* eta);

/* z - B (B^T z) for a p x r basis B with orthonormal columns. */
DFO_API dfo_status dfo_project_complement(const double* basis, size_t p, size_t r, const double* z, double* out);

#ifdef __cplusplus
}
#endif

#endif /* DFO_H */
