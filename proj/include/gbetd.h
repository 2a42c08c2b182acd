/* C API for the off-policy TD evaluation library: opaque handles plus error
 * codes. All functions returning gbetd_status leave outputs untouched on
 * failure; gbetd_last_error() describes the most recent failure on the
 * calling thread. */

#ifndef GBETD_H
#define GBETD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GBETD_API __declspec(dllexport)
#else
#define GBETD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gbetd_status {
  GBETD_OK = 0,
  GBETD_ERR_INVALID_ARGUMENT = 1,
  GBETD_ERR_IO = 2,
  GBETD_ERR_CONDITION_FAILED = 3, /* numerical precondition (singularity, ...) */
  GBETD_ERR_CHECK_FAILED = 4,     /* a checked recipe's acceptance test failed */
  GBETD_ERR_INTERNAL = 5
} gbetd_status;

GBETD_API const char* gbetd_status_name(gbetd_status status);
GBETD_API const char* gbetd_last_error(void);

/* ----------------------------------------------------------------- MDPs -- */

typedef struct gbetd_mdp gbetd_mdp;

/* name: "toy" (21-state benchmark) or "two_state". */
GBETD_API gbetd_status gbetd_mdp_builtin(const char* name, gbetd_mdp** out);
GBETD_API gbetd_status gbetd_mdp_load(const char* path, gbetd_mdp** out);
GBETD_API void gbetd_mdp_free(gbetd_mdp* mdp);

GBETD_API int gbetd_mdp_num_states(const gbetd_mdp* mdp);
GBETD_API int gbetd_mdp_num_features(const gbetd_mdp* mdp);

/* checks[0..3]: row stochasticity, absolute continuity, discounted spectral
 * radius < 1, behavior-chain irreducibility. Any may be NULL. */
GBETD_API gbetd_status gbetd_mdp_validate(const gbetd_mdp* mdp, int checks[4]);

/* out must hold num_states doubles. */
GBETD_API gbetd_status gbetd_mdp_value_function(const gbetd_mdp* mdp, double* out);
GBETD_API gbetd_status gbetd_mdp_stationary_dist(const gbetd_mdp* mdp, double* out);

/* --------------------------------------------------------------- schemes -- */

typedef struct gbetd_scheme gbetd_scheme;

GBETD_API gbetd_status gbetd_scheme_constant(double lambda, gbetd_scheme** out);
GBETD_API gbetd_status gbetd_scheme_scaling(const gbetd_mdp* mdp, double c, double beta,
                                            gbetd_scheme** out);
GBETD_API gbetd_status gbetd_scheme_retrace(const gbetd_mdp* mdp, double beta,
                                            gbetd_scheme** out);
GBETD_API gbetd_status gbetd_scheme_truncated_retrace(const gbetd_mdp* mdp, double k, double c,
                                                      double beta, gbetd_scheme** out);
GBETD_API void gbetd_scheme_free(gbetd_scheme* scheme);

/* ------------------------------------------------------------------ runs -- */

/* Off-policy LSTD over `steps` behavior transitions. theta_out must hold
 * num_features doubles; trace_clamp <= 0 disables the constrained variant;
 * max_trace_norm_out may be NULL. */
GBETD_API gbetd_status gbetd_lstd_run(const gbetd_mdp* mdp, const gbetd_scheme* scheme,
                                      long steps, uint64_t seed, double trace_clamp,
                                      double* theta_out, double* max_trace_norm_out);

/* ---------------------------------------------------------------- recipes -- */

/* Batch experiment recipes: trace-stats, ergodicity, toy-lstd-sweep,
 * toy-td-curve, mcar-suite, counterexample, theorem2-check. config_path and
 * out_dir may be NULL (built-in defaults / config's out_dir). */
GBETD_API gbetd_status gbetd_run_recipe(const char* recipe, const char* config_path,
                                        const char* out_dir, long seed_offset, int slow);

#ifdef __cplusplus
}
#endif

#endif /* GBETD_H */
