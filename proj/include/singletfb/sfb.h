/* Public C API for the singletfb library: dissipative stabilization of the
 * three-atom singlet state under quantum-jump feedback, at desk scale.
 *
 * All entry points are exception-free: they return an sfb_status code and,
 * when given a non-NULL sfb_error, fill it with the code and a message.
 * Handles are opaque; every *_free accepts NULL.
 */
#ifndef SINGLETFB_SFB_H
#define SINGLETFB_SFB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sfb_status {
  SFB_OK = 0,
  SFB_E_PARSE = 1,             /* malformed config text / missing required keys */
  SFB_E_UNKNOWN_KEY = 2,       /* config key not recognized */
  SFB_E_RANGE = 3,             /* value outside its documented bounds */
  SFB_E_DIM = 4,               /* operator/state dimension mismatch */
  SFB_E_NOT_HERMITIAN = 5,     /* Hermitian input expected */
  SFB_E_KERNEL_NONE = 6,       /* no steady state at tolerance */
  SFB_E_KERNEL_DEGENERATE = 7, /* steady state not unique */
  SFB_E_STIFF = 8,             /* integrator step size collapsed */
  SFB_E_NOT_CONVERGED = 9,     /* iteration/horizon budget exhausted */
  SFB_E_IO = 10,               /* file read/write failure */
  SFB_E_INVALID = 11,          /* invalid argument to an API call */
  SFB_E_BUFFER = 12,           /* caller buffer too small */
  SFB_E_INTERNAL = 13          /* invariant violation inside the library */
} sfb_status;

typedef struct sfb_error {
  int code;          /* sfb_status value */
  char message[512]; /* NUL-terminated description */
} sfb_error;

typedef struct sfb_config sfb_config;
typedef struct sfb_result sfb_result;

/* ---- configuration ----------------------------------------------------- */

/* Parse `key = value` config text ('#' comments, "pi" suffix on angles).
 * Syntax, unknown keys and range violations fail here; required keys are
 * checked when the config is used. */
int sfb_config_parse(const char* text, sfb_config** out_cfg, sfb_error* err);
int sfb_config_parse_file(const char* path, sfb_config** out_cfg, sfb_error* err);

/* Set one key, same syntax and validation as a config line. */
int sfb_config_set(sfb_config* cfg, const char* key, const char* value, sfb_error* err);

void sfb_config_free(sfb_config* cfg);

/* Copy a named preset's config text into buf (NUL-terminated).
 * SFB_E_BUFFER if buf_len is too small; *needed (optional) gets the size. */
int sfb_preset(const char* name, char* buf, size_t buf_len, size_t* needed, sfb_error* err);

/* Comma-separated preset names. */
int sfb_preset_names(char* buf, size_t buf_len, size_t* needed, sfb_error* err);

/* ---- running ------------------------------------------------------------ */

/* Dispatch on the config's mode, write CSV output (out_path overrides the
 * config's `out` when non-NULL), and place a one-line summary in summary. */
int sfb_run(const sfb_config* cfg, const char* out_path, char* summary, size_t summary_len,
            sfb_error* err);

/* Structured entry points (no files written). */
int sfb_solve_steady(const sfb_config* cfg, sfb_result** out_res, sfb_error* err);
int sfb_solve_evolve(const sfb_config* cfg, sfb_result** out_res, sfb_error* err);

/* ---- results ------------------------------------------------------------ */

/* Hilbert-space dimension of the stored state (0 if none). */
int sfb_result_dim(const sfb_result* res);

/* Number of time samples (0 for steady results). */
size_t sfb_result_series_length(const sfb_result* res);

/* Copy a named series into buf: "t", "fidelity", "trace", "purity",
 * "min_eig". SFB_E_INVALID for unknown names, SFB_E_BUFFER if len is short. */
int sfb_result_series(const sfb_result* res, const char* field, double* buf, size_t len,
                      sfb_error* err);

/* Named scalar ("fidelity", "purity", "trace", "min_eig"); NaN if unknown. */
double sfb_result_scalar(const sfb_result* res, const char* field);

/* Copy the final density matrix, row-major, interleaved re/im (2*dim*dim
 * doubles). SFB_E_BUFFER if len is short. */
int sfb_result_final_rho(const sfb_result* res, double* buf, size_t len, sfb_error* err);

void sfb_result_free(sfb_result* res);

/* ---- misc ---------------------------------------------------------------- */

const char* sfb_status_name(int code); /* "E_RANGE", ... ("OK" for 0) */
const char* sfb_version(void);

/* Process exit code convention: 0 ok; 1 config/usage errors (PARSE,
 * UNKNOWN_KEY, RANGE, IO, INVALID, BUFFER); 2 solver failures. */
int sfb_exit_code(int status);

#ifdef __cplusplus
}
#endif

#endif /* SINGLETFB_SFB_H */
