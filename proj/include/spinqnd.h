/*
 * spinqnd — stroboscopic spin-noise / QND magnetometry simulator.
 *
 * C interface of the shared library. All entry points return an sq_status;
 * on failure, sq_last_error() holds a thread-local human-readable message.
 * Objects handed out as opaque pointers are released with their matching
 * _free function; strings returned through char** are released with
 * sq_string_free().
 */

#ifndef SPINQND_H
#define SPINQND_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sq_status {
    SQ_OK = 0,
    SQ_ERR_INVALID_ARG = 1, /* bad pointer / domain violation */
    SQ_ERR_CONFIG = 2,      /* config parse or validation failure */
    SQ_ERR_NUMERIC = 3,     /* numerical failure inside a module */
    SQ_ERR_IO = 4,          /* filesystem failure */
    SQ_ERR_INTERNAL = 5
} sq_status;

const char* sq_version(void);

/* Message for the most recent failure on this thread ("" if none). */
const char* sq_last_error(void);

void sq_string_free(char* s);

/* ---------------- run configuration ---------------- */

typedef struct sq_config sq_config;

sq_status sq_config_load_file(const char* path, sq_config** out);
sq_status sq_config_load_string(const char* json_text, sq_config** out);
void sq_config_free(sq_config* cfg);

/* Effective config (defaults resolved) as canonical JSON. */
sq_status sq_config_effective_json(const sq_config* cfg, char** json_out);

/*
 * Full validation of a config file without executing it. Returns SQ_OK when
 * the file is valid; diagnostics_out (optional) receives one line per finding
 * ("error|warning field.path: message"). Warnings alone keep SQ_OK.
 */
sq_status sq_config_validate_file(const char* path, char** diagnostics_out);

/* ---------------- experiment runner ---------------- */

typedef struct sq_run_options {
    const char* out_dir;   /* NULL: use the config's output_dir */
    int has_seed;          /* nonzero: `seed` overrides the config */
    uint64_t seed;
    long trajectories;     /* <= 0: use the config's count */
    int threads;           /* <= 0: hardware concurrency */
} sq_run_options;

/*
 * Executes the configured experiment, writes its CSV outputs plus
 * run_manifest.json, and (optionally) returns the manifest JSON. Output
 * bytes are a pure function of (config, seed, trajectories).
 */
sq_status sq_run(const sq_config* cfg, const sq_run_options* opts,
                 char** manifest_json_out);

/* Rewrites an experiment CSV as plot-ready columns + a JSON axes sidecar. */
sq_status sq_emit_plotdata(const char* csv_path, const char* out_dir);

/* ---------------- spin-temperature statistics ---------------- */

sq_status sq_spin_beta_from_polarization(double p, double* out);
sq_status sq_spin_partition_function(double nuclear_spin, double beta, double* out);
sq_status sq_spin_variance_per_atom(double nuclear_spin, double p, double* out);
sq_status sq_spin_noise_ratio(double nuclear_spin, double p, double* out);

/* ---------------- two-pulse QND protocol ---------------- */

typedef struct sq_protocol_params {
    double n_atoms;
    double gamma;             /* rad s^-1 T^-1 */
    double r_sd;              /* s^-1 */
    double r_se;              /* s^-1 */
    double od;
    double total_time;        /* s */
    double p_init;            /* polarization before the first pulse */
    double pulse_decoherence; /* coherence cost fraction per unit pulse strength */
} sq_protocol_params;

typedef enum sq_scheme { SQ_SCHEME_ONE_PULSE = 0, SQ_SCHEME_TWO_PULSE = 1 } sq_scheme;

typedef struct sq_protocol_result {
    double eps1;
    double eps2;
    double t_m;
    double var_rel_sql;
} sq_protocol_result;

sq_status sq_protocol_sql_variance(const sq_protocol_params* params, double* out);
sq_status sq_protocol_optimize(const sq_protocol_params* params, sq_scheme scheme,
                               sq_protocol_result* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SPINQND_H */
