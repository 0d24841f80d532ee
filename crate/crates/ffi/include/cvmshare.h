/* C ABI for the cvmshare mechanisms.
 *
 * Maintained by hand alongside crates/ffi/src/lib.rs; the Rust tests in
 * that crate exercise every symbol declared here.
 *
 * Conventions:
 *   - fallible calls return cvms_status and write results through out
 *     pointers; on failure, cvms_last_error_message() describes why
 *     (thread-local, valid until the next failing call on the thread);
 *   - constructors return NULL on invalid parameters;
 *   - losses are deterministic in the seed argument and match a
 *     two-agent mechanism run of the core library with the same seed.
 */

#ifndef CVMSHARE_H
#define CVMSHARE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cvms_status {
  CVMS_OK = 0,
  CVMS_NULL_POINTER = 1,
  CVMS_INVALID_ARGUMENT = 2,
} cvms_status;

/* Opaque posterior-model handle. */
typedef struct CvmsModel CvmsModel;

const char *cvms_version(void);
const char *cvms_last_error_message(void);

/* Two-sample statistics over raw arrays. Empty samples are rejected. */
cvms_status cvms_cvm_two_sample(const double *x, size_t x_len,
                                const double *y, size_t y_len, double *out);
cvms_status cvms_ks_statistic(const double *x, size_t x_len,
                              const double *y, size_t y_len, double *out);
cvms_status cvms_mean_diff(const double *x, size_t x_len,
                           const double *y, size_t y_len, double *out);

/* Standard normal CDF (absolute error below 1e-12 for |z| <= 8). */
double cvms_std_normal_cdf(double z);

/* Conjugate posterior models. */
CvmsModel *cvms_model_new_normal_normal(double prior_mean, double prior_var,
                                        double obs_var);
CvmsModel *cvms_model_new_beta_bernoulli(double alpha, double beta);
void cvms_model_free(CvmsModel *model);

/* Posterior-predictive CDF P(Z <= t | data, t); the evaluation point is
 * part of the conditioning set. Beta-Bernoulli data must be 0/1. */
cvms_status cvms_model_cond_pred_cdf(const CvmsModel *model,
                                     const double *data, size_t data_len,
                                     double t, double *out);

/* Single-variable Bayesian loss of a submission against a pooled
 * dataset (needs at least two pooled points). */
cvms_status cvms_loss_bayesian(const CvmsModel *model,
                               const double *submission, size_t submission_len,
                               const double *pooled, size_t pooled_len,
                               uint64_t seed, double *out_tau);

/* Prior-agnostic loss with a constant augmentation size; the pooled
 * dataset needs at least 2 + augment_size points. */
cvms_status cvms_loss_prior_free(const double *submission, size_t submission_len,
                                 const double *pooled, size_t pooled_len,
                                 size_t augment_size, uint64_t seed,
                                 double *out_tau);

#ifdef __cplusplus
}
#endif

#endif /* CVMSHARE_H */
