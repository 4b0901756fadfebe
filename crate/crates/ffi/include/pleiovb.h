#ifndef PLEIOVB_H
#define PLEIOVB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum PleiovbStatus {
  PLEIOVB_STATUS_OK = 0,
  PLEIOVB_STATUS_NULL_POINTER = 1,
  PLEIOVB_STATUS_INVALID_ARGUMENT = 2,
  PLEIOVB_STATUS_IO = 3,
  PLEIOVB_STATUS_DATA = 4,
  PLEIOVB_STATUS_NUMERICAL = 5,
  PLEIOVB_STATUS_PANIC = 6,
} PleiovbStatus;

/**
 * Phenotype family.
 */
typedef enum PleiovbFamily {
  PLEIOVB_FAMILY_QUANT = 0,
  PLEIOVB_FAMILY_BINARY = 1,
} PleiovbFamily;

/**
 * One study.
 */
typedef struct PleiovbDataset PleiovbDataset;

/**
 * A joint fit or a single-trait fit, with the centering needed to score new
 * samples.
 */
typedef struct PleiovbFit PleiovbFit;

/**
 * Solver settings; obtain defaults from [`pleiovb_fit_config_default`].
 */
typedef struct PleiovbFitConfig {
  size_t max_iter;
  double rel_tol;
  /**
   * Initial group probabilities (00, 01, 10, 11).
   */
  double init_group_probs[4];
  double init_sigma_beta_sq[2];
} PleiovbFitConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *pleiovb_last_error(void);

/**
 * Default solver settings.
 */
struct PleiovbFitConfig pleiovb_fit_config_default(void);

/**
 * Loads a study from tab-separated files. `covariates` may be null.
 *
 * # Safety
 * Paths must be null or valid NUL-terminated strings; `out` must be writable.
 */
enum PleiovbStatus pleiovb_dataset_load(const char *genotypes,
                                        const char *phenotype,
                                        const char *covariates,
                                        enum PleiovbFamily family,
                                        struct PleiovbDataset **out);

/**
 * Builds a study from memory. `genotypes` is n × p row-major with values in
 * {0, 1, 2}; sample and SNP ids are generated as `s1…`, `snp1…`.
 *
 * # Safety
 * `genotypes` must hold n·p doubles and `phenotype` n doubles.
 */
enum PleiovbStatus pleiovb_dataset_new(size_t n,
                                       size_t p,
                                       const double *genotypes,
                                       const double *phenotype,
                                       enum PleiovbFamily family,
                                       struct PleiovbDataset **out);

/**
 * # Safety
 * `d` must be null or a handle from this library, not yet freed.
 */
void pleiovb_dataset_free(struct PleiovbDataset *d);

/**
 * # Safety
 * `d` must be a live dataset handle.
 */
size_t pleiovb_dataset_n_samples(const struct PleiovbDataset *d);

/**
 * # Safety
 * `d` must be a live dataset handle.
 */
size_t pleiovb_dataset_n_snps(const struct PleiovbDataset *d);

/**
 * Centers the study in place.
 *
 * # Safety
 * `d` must be a live dataset handle.
 */
enum PleiovbStatus pleiovb_dataset_center(struct PleiovbDataset *d);

/**
 * Reorders the SNPs of `d2` to match `d1`.
 *
 * # Safety
 * Both must be live, distinct dataset handles.
 */
enum PleiovbStatus pleiovb_dataset_align(struct PleiovbDataset *d1, struct PleiovbDataset *d2);

/**
 * Fits the joint model to two centered, aligned studies. `cfg` may be null
 * for defaults.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum PleiovbStatus pleiovb_fit_joint(const struct PleiovbDataset *d1,
                                     const struct PleiovbDataset *d2,
                                     const struct PleiovbFitConfig *cfg,
                                     struct PleiovbFit **out);

/**
 * Fits the single-trait model to one centered study.
 *
 * # Safety
 * `d` must be live; `out` must be writable.
 */
enum PleiovbStatus pleiovb_fit_single(const struct PleiovbDataset *d,
                                      const struct PleiovbFitConfig *cfg,
                                      struct PleiovbFit **out);

/**
 * # Safety
 * `f` must be null or a handle from this library, not yet freed.
 */
void pleiovb_fit_free(struct PleiovbFit *f);

/**
 * Number of traits in the fit (2 for joint, 1 for single).
 *
 * # Safety
 * `f` must be a live fit handle.
 */
size_t pleiovb_fit_n_traits(const struct PleiovbFit *f);

/**
 * Number of SNPs in the fit.
 *
 * # Safety
 * `f` must be a live fit handle.
 */
size_t pleiovb_fit_n_snps(const struct PleiovbFit *f);

/**
 * Final lower bound, iteration count and convergence flag.
 *
 * # Safety
 * `f` must be live; output pointers must be writable or null.
 */
enum PleiovbStatus pleiovb_fit_summary(const struct PleiovbFit *f,
                                       double *elbo,
                                       size_t *iterations,
                                       bool *converged);

/**
 * Copies the lfdr of trait `k` (0-based) into `out[0..len]`; `len` must
 * equal the SNP count.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum PleiovbStatus pleiovb_fit_lfdr(const struct PleiovbFit *f, size_t k, double *out, size_t len);

/**
 * Estimated group probabilities (00, 01, 10, 11) of a joint fit.
 *
 * # Safety
 * `out` must hold 4 doubles.
 */
enum PleiovbStatus pleiovb_fit_group_probs(const struct PleiovbFit *f, double *out);

/**
 * Predicts trait `k` for one raw genotype row. Quantitative fits write the
 * predicted phenotype to `value`; case-control fits write the case
 * probability, using covariate row `z` (`q` entries, intercept first).
 *
 * # Safety
 * `x` must hold `p` doubles, `z` `q` doubles (or be null with q = 0).
 */
enum PleiovbStatus pleiovb_fit_predict(const struct PleiovbFit *f,
                                       size_t k,
                                       const double *x,
                                       size_t p,
                                       const double *z,
                                       size_t q,
                                       double *value);

/**
 * Centering constants of trait `k`: writes the phenotype mean.
 *
 * # Safety
 * `f` must be live; `out` writable.
 */
enum PleiovbStatus pleiovb_fit_phenotype_mean(const struct PleiovbFit *f, size_t k, double *out);

/**
 * Pleiotropy likelihood-ratio test on two centered, aligned studies.
 *
 * # Safety
 * Handles must be live; output pointers writable or null.
 */
enum PleiovbStatus pleiovb_pleiotropy_test(const struct PleiovbDataset *d1,
                                           const struct PleiovbDataset *d2,
                                           const struct PleiovbFitConfig *cfg,
                                           double *lambda,
                                           double *p_value,
                                           bool *converged);

/**
 * Upper tail of χ²₁ at `x` ≥ 0.
 *
 * # Safety
 * `out` must be writable.
 */
enum PleiovbStatus pleiovb_chisq1_survival(double x, double *out);

/**
 * Global FDR selection at target `tau`. Writes 1/0 per SNP into `selected`,
 * the lfdr threshold into `zeta` and the estimated FDR into `fdr`.
 *
 * # Safety
 * `lfdr` and `selected` must hold `len` elements; scalars writable or null.
 */
enum PleiovbStatus pleiovb_fdr_select(const double *lfdr,
                                      size_t len,
                                      double tau,
                                      uint8_t *selected,
                                      double *zeta,
                                      double *fdr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLEIOVB_H */
