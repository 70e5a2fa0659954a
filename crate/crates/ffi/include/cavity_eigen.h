#ifndef CAVITY_EIGEN_H
#define CAVITY_EIGEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum CeStatus {
  CE_STATUS_OK = 0,
  CE_STATUS_NULL_POINTER = 1,
  CE_STATUS_INVALID_ARGUMENT = 2,
  CE_STATUS_GENERATION_FAILED = 3,
  CE_STATUS_NOT_CONVERGED = 4,
  CE_STATUS_NUMERICAL = 5,
  CE_STATUS_IO = 6,
  CE_STATUS_PANIC = 7,
} CeStatus;

typedef enum CeMode {
  CE_MODE_FERROMAGNETIC = 0,
  CE_MODE_PARAMAGNETIC = 1,
  CE_MODE_CRITICAL = 2,
} CeMode;

/**
 * Degree distribution plus coupling law.
 */
typedef struct CeEnsemble CeEnsemble;

/**
 * Sparse symmetric matrix with zero diagonal.
 */
typedef struct CeInstance CeInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ce_last_error_message(void);

/**
 * Ensemble with degree mass `p[0..len]` and couplings `±j` with mean `delta * j`.
 */
enum CeStatus ce_ensemble_new_binary(const double *degree_mass,
                                     size_t len,
                                     double delta,
                                     double j,
                                     struct CeEnsemble **out);

/**
 * Ensemble with Gaussian couplings.
 */
enum CeStatus ce_ensemble_new_gaussian(const double *degree_mass,
                                       size_t len,
                                       double mean,
                                       double variance,
                                       struct CeEnsemble **out);

void ce_ensemble_free(struct CeEnsemble *ensemble);

/**
 * Draws an `n`-index instance from `ensemble`.
 */
enum CeStatus ce_instance_generate(const struct CeEnsemble *ensemble,
                                   size_t n,
                                   uint64_t seed,
                                   struct CeInstance **out);

/**
 * Instance from `m` undirected edges `(rows[e], cols[e], weights[e])`.
 */
enum CeStatus ce_instance_from_edges(size_t n,
                                     const size_t *rows,
                                     const size_t *cols,
                                     const double *weights,
                                     size_t m,
                                     struct CeInstance **out);

void ce_instance_free(struct CeInstance *instance);

/**
 * Number of indices, or 0 for a null handle.
 */
size_t ce_instance_n(const struct CeInstance *instance);

/**
 * Number of undirected edges, or 0 for a null handle.
 */
size_t ce_instance_edge_count(const struct CeInstance *instance);

/**
 * Writes the plain-text edge list to `path`.
 */
enum CeStatus ce_instance_write_edge_list(const struct CeInstance *instance, const char *path);

/**
 * Power iteration. `v_out` may be null; otherwise it receives `n`
 * components normalized to `|v|² = n`, and `v_len` must equal `n`.
 * `tol <= 0` selects the default tolerance.
 */
enum CeStatus ce_power_iterate(const struct CeInstance *instance,
                               double tol,
                               uint64_t seed,
                               double *out_lambda,
                               double *out_m,
                               double *v_out,
                               size_t v_len);

/**
 * Cavity bisection threshold; exact on forests. `tol <= 0` selects the default.
 */
enum CeStatus ce_cavity_eigenvalue(const struct CeInstance *instance,
                                   double tol,
                                   double *out_lambda);

/**
 * Stable root of `A = lambda − c/A`.
 */
enum CeStatus ce_a_star(double lambda, double c, double *out);

enum CeStatus ce_single_degree_eigenvalue(size_t k,
                                          double j,
                                          double delta,
                                          double *out_lambda,
                                          enum CeMode *out_mode);

enum CeStatus ce_dense_limit_eigenvalue(double mu,
                                        double j,
                                        double *out_lambda,
                                        enum CeMode *out_mode);

/**
 * Population-dynamics eigenvalue of an ensemble. `pop_size == 0` and
 * `tol <= 0` select defaults.
 */
enum CeStatus ce_detect_eigenvalue(const struct CeEnsemble *ensemble,
                                   size_t pop_size,
                                   double tol,
                                   uint64_t seed,
                                   double *out_lambda,
                                   enum CeMode *out_mode);

/**
 * Bias for which `lambda` is the ferromagnetic eigenvalue under the
 * decoupled first-moment condition. Requires binary couplings.
 */
enum CeStatus ce_mixture_delta_of_lambda(const struct CeEnsemble *ensemble,
                                         double lambda,
                                         size_t pop_size,
                                         size_t sweeps,
                                         uint64_t seed,
                                         double *out_delta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVITY_EIGEN_H */
