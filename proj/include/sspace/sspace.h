/*
 * sspace: weight-delta subspace projection and Mode Subspace Overlap analysis.
 *
 * Plain C interface over the C++ core. Objects are opaque handles owned by the
 * caller and released with the matching *_free function. Every fallible call
 * returns an sspace_status; on failure sspace_last_error() holds a one-line
 * message for the calling thread. Returned strings stay valid until the
 * owning handle is freed (or, for sspace_last_error, until the next call on
 * the same thread).
 */
#ifndef SSPACE_SSPACE_H
#define SSPACE_SSPACE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SSPACE_BUILDING_LIBRARY)
#    define SSPACE_API __declspec(dllexport)
#  else
#    define SSPACE_API __declspec(dllimport)
#  endif
#else
#  define SSPACE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sspace_status {
  SSPACE_OK = 0,
  SSPACE_ERR_USAGE = 1,    /* invalid argument or spec */
  SSPACE_ERR_IO = 2,       /* file cannot be opened, read or written */
  SSPACE_ERR_FORMAT = 3,   /* malformed container or activation file */
  SSPACE_ERR_MISMATCH = 4, /* tensor names, shapes or dimensions disagree */
  SSPACE_ERR_NUMERIC = 5,  /* non-finite data, zero norm, SVD failure */
  SSPACE_ERR_INTERNAL = 6
} sspace_status;

typedef enum sspace_basis_mode {
  SSPACE_BASIS_TOPK = 0,
  SSPACE_BASIS_RANDOMK = 1,
  SSPACE_BASIS_RANDOM = 2
} sspace_basis_mode;

typedef enum sspace_scheme {
  SSPACE_SCHEME_PARALLEL = 0,
  SSPACE_SCHEME_ORTHOGONAL = 1
} sspace_scheme;

typedef struct sspace_checkpoint sspace_checkpoint;
typedef struct sspace_report sspace_report;

SSPACE_API const char* sspace_version(void);
SSPACE_API const char* sspace_last_error(void);
SSPACE_API const char* sspace_status_name(sspace_status status);

/* Worker threads for per-tensor loops; 0 restores the default
 * (SSPACE_THREADS, else hardware concurrency). */
SSPACE_API void sspace_set_threads(unsigned count);

/* ---- checkpoints ------------------------------------------------------- */

SSPACE_API sspace_status sspace_checkpoint_read(const char* path, sspace_checkpoint** out);
SSPACE_API sspace_status sspace_checkpoint_write(const sspace_checkpoint* ckpt, const char* path);
SSPACE_API void sspace_checkpoint_free(sspace_checkpoint* ckpt);

SSPACE_API size_t sspace_checkpoint_tensor_count(const sspace_checkpoint* ckpt);
/* Name of the i-th tensor in lexicographic order, or NULL when out of range. */
SSPACE_API const char* sspace_checkpoint_tensor_name(const sspace_checkpoint* ckpt, size_t index);
SSPACE_API const char* sspace_checkpoint_provenance(const sspace_checkpoint* ckpt);
SSPACE_API sspace_status sspace_checkpoint_set_provenance(sspace_checkpoint* ckpt, const char* tag);

/* Shape of a tensor. Writes at most `capacity` dims into `dims` and the true
 * rank into `*rank`. */
SSPACE_API sspace_status sspace_checkpoint_tensor_shape(const sspace_checkpoint* ckpt, const char* name,
                                                        int64_t* dims, size_t capacity, size_t* rank);
/* Element values widened to double, row-major. `count` must equal the element count. */
SSPACE_API sspace_status sspace_checkpoint_tensor_values(const sspace_checkpoint* ckpt, const char* name,
                                                         double* values, size_t count);

/* ---- deltas ------------------------------------------------------------- */

/* minuend - subtrahend; ids may be NULL to reuse each input's provenance. */
SSPACE_API sspace_status sspace_delta_compute(const sspace_checkpoint* minuend, const sspace_checkpoint* subtrahend,
                                              const char* minuend_id, const char* subtrahend_id,
                                              sspace_checkpoint** out);
SSPACE_API sspace_status sspace_delta_negate(const sspace_checkpoint* delta, sspace_checkpoint** out);
SSPACE_API sspace_status sspace_delta_apply(const sspace_checkpoint* base, const sspace_checkpoint* delta,
                                            sspace_checkpoint** out);
/* Per-tensor shape, dtype and Frobenius norm. */
SSPACE_API sspace_status sspace_delta_summary(const sspace_checkpoint* delta, sspace_report** report);

/* ---- projection schemes and energy -------------------------------------- */

typedef struct sspace_projection_spec {
  double rho;              /* (0, 1] */
  sspace_basis_mode mode;
  sspace_scheme scheme;
  const char* layers;      /* "all", "0,3" or "p70,85"; NULL means all */
  uint64_t seed;
} sspace_projection_spec;

/* One projected checkpoint per rho value (written to out_checkpoints[i],
 * which the caller frees) plus a single report covering every run.
 * `out_checkpoints` may be NULL to only compute the report. */
SSPACE_API sspace_status sspace_project(const sspace_checkpoint* subspace_source, const sspace_checkpoint* task_update,
                                        const sspace_checkpoint* base, const sspace_projection_spec* spec,
                                        const double* rhos, size_t rho_count, sspace_checkpoint** out_checkpoints,
                                        sspace_report** report);

/* Energy-kept ratios over a rho grid without producing checkpoints. */
SSPACE_API sspace_status sspace_energy(const sspace_checkpoint* subspace_source, const sspace_checkpoint* task_update,
                                       sspace_basis_mode mode, const char* layers, uint64_t seed, const double* rhos,
                                       size_t rho_count, sspace_report** report);

/* ---- Mode Subspace Overlap --------------------------------------------- */

/* Pairwise MSO over labeled deltas (count >= 2). */
SSPACE_API sspace_status sspace_weight_mso(const sspace_checkpoint* const* deltas, const char* const* labels,
                                           size_t count, const char* layers, const double* etas, size_t eta_count,
                                           sspace_report** report);

/* MSO of two ambient-first matrices given as row-major d x n_v and d x n_w buffers. */
SSPACE_API sspace_status sspace_matrix_mso(const double* v, size_t d, size_t n_v, const double* w, size_t n_w,
                                           double eta, double* mso, double* baseline, size_t* k_v, size_t* k_w);

/* Activation-file MSO per layer plus the depth-band average. */
SSPACE_API sspace_status sspace_activation_mso(const char* path_a, const char* path_b, const double* etas,
                                               size_t eta_count, double band_low_pct, double band_high_pct,
                                               int center, sspace_report** report);

/* ---- planted fixtures -------------------------------------------------- */

typedef struct sspace_synth_spec {
  int64_t rows;
  int64_t cols;
  int64_t planted_k;
  double in_energy;
  uint64_t seed;
  int64_t layer_count;
  int include_vectors;
} sspace_synth_spec;

SSPACE_API sspace_status sspace_synth_model(const sspace_synth_spec* spec, sspace_checkpoint** base,
                                            sspace_checkpoint** aligned, sspace_checkpoint** finetuned,
                                            sspace_report** truth);

/* Two activation sets. planted != 0 builds sets sharing `shared_dim` modes;
 * otherwise both are i.i.d. Gaussian. */
SSPACE_API sspace_status sspace_synth_activations(int planted, int64_t layer_count, int64_t n, int64_t d,
                                                  int64_t shared_dim, uint64_t seed, sspace_checkpoint** set_a,
                                                  sspace_checkpoint** set_b);

/* ---- reports ----------------------------------------------------------- */

/* JSON document carrying "schema" and "tool" fields. */
SSPACE_API const char* sspace_report_json(const sspace_report* report);
SSPACE_API const char* sspace_report_csv(const sspace_report* report);
SSPACE_API void sspace_report_free(sspace_report* report);

#ifdef __cplusplus
}
#endif

#endif /* SSPACE_SSPACE_H */
