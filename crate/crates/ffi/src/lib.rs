//! C ABI over the core mechanisms.
//!
//! Conventions: every fallible call returns a `CvmsStatus` and writes its
//! result through an out-pointer; models are opaque handles created and
//! freed here; the last error message is kept per thread and readable as
//! a C string until the next failing call. The matching declarations
//! live in `include/cvmshare.h`, which is maintained by hand and checked
//! by the round-trip tests in this crate.

use std::cell::RefCell;
use std::ffi::{c_char, CString};

use cvmshare::bayes::{BetaBernoulliModel, NormalNormalModel, PosteriorModel};
use cvmshare::features::{FeatureBank, Item};
use cvmshare::mechanism::{
    loss_alg1, loss_alg3, MechanismError, SplitMap, Submission, SubmissionSet,
};
use cvmshare::rng::agent_stream;
use cvmshare::stats::{cvm_two_sample, ks_statistic, mean_diff, Sample};

/// Status codes shared with the C header.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvmsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) -> CvmsStatus {
    let text = CString::new(message.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
    CvmsStatus::InvalidArgument
}

/// Message of the last failing call on this thread. Valid until the next
/// failing call; never null.
#[no_mangle]
pub extern "C" fn cvms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Crate version as a static C string.
#[no_mangle]
pub extern "C" fn cvms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() && len > 0 {
        None
    } else if len == 0 {
        Some(&[])
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

fn sample_arg(points: &[f64], name: &str) -> Result<Sample, CvmsStatus> {
    Sample::new(points.to_vec()).map_err(|e| set_error(format!("{name}: {e}")))
}

macro_rules! two_sample_fn {
    ($c_name:ident, $rust_fn:ident, $doc:literal) => {
        #[doc = $doc]
        ///
        /// # Safety
        /// `x` and `y` must point to readable arrays of the given lengths
        /// and `out` must be a writable pointer.
        #[no_mangle]
        pub unsafe extern "C" fn $c_name(
            x: *const f64,
            x_len: usize,
            y: *const f64,
            y_len: usize,
            out: *mut f64,
        ) -> CvmsStatus {
            if out.is_null() {
                return CvmsStatus::NullPointer;
            }
            let (Some(xs), Some(ys)) = (slice_arg(x, x_len), slice_arg(y, y_len)) else {
                return CvmsStatus::NullPointer;
            };
            let (Ok(xs), Ok(ys)) = (sample_arg(xs, "x"), sample_arg(ys, "y")) else {
                return CvmsStatus::InvalidArgument;
            };
            match $rust_fn(&xs, &ys) {
                Ok(value) => {
                    *out = value;
                    CvmsStatus::Ok
                }
                Err(e) => set_error(e),
            }
        }
    };
}

two_sample_fn!(
    cvms_cvm_two_sample,
    cvm_two_sample,
    "Two-sample Cramér–von Mises statistic over raw arrays."
);
two_sample_fn!(cvms_ks_statistic, ks_statistic, "Two-sample Kolmogorov–Smirnov statistic.");
two_sample_fn!(cvms_mean_diff, mean_diff, "Absolute difference of sample means.");

/// Standard normal CDF.
#[no_mangle]
pub extern "C" fn cvms_std_normal_cdf(z: f64) -> f64 {
    cvmshare::bayes::std_normal_cdf(z)
}

/// Opaque posterior-model handle.
pub struct CvmsModel {
    inner: PosteriorModel,
}

/// Create a normal likelihood / normal prior model. Returns null on
/// invalid parameters (see `cvms_last_error_message`).
#[no_mangle]
pub extern "C" fn cvms_model_new_normal_normal(
    prior_mean: f64,
    prior_var: f64,
    obs_var: f64,
) -> *mut CvmsModel {
    match NormalNormalModel::new(prior_mean, prior_var, obs_var) {
        Ok(model) => {
            Box::into_raw(Box::new(CvmsModel { inner: PosteriorModel::NormalNormal(model) }))
        }
        Err(e) => {
            set_error(e);
            std::ptr::null_mut()
        }
    }
}

/// Create a Bernoulli likelihood / beta prior model. Returns null on
/// invalid parameters.
#[no_mangle]
pub extern "C" fn cvms_model_new_beta_bernoulli(alpha: f64, beta: f64) -> *mut CvmsModel {
    match BetaBernoulliModel::new(alpha, beta) {
        Ok(model) => {
            Box::into_raw(Box::new(CvmsModel { inner: PosteriorModel::BetaBernoulli(model) }))
        }
        Err(e) => {
            set_error(e);
            std::ptr::null_mut()
        }
    }
}

/// Destroy a model handle. Null is ignored.
///
/// # Safety
/// `model` must be a pointer returned by a `cvms_model_new_*` call that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn cvms_model_free(model: *mut CvmsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Posterior-predictive CDF `P(Z <= t | data, t)`.
///
/// # Safety
/// `model` must be a live handle; `data` must point to `data_len`
/// readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvms_model_cond_pred_cdf(
    model: *const CvmsModel,
    data: *const f64,
    data_len: usize,
    t: f64,
    out: *mut f64,
) -> CvmsStatus {
    if model.is_null() || out.is_null() {
        return CvmsStatus::NullPointer;
    }
    let Some(points) = slice_arg(data, data_len) else {
        return CvmsStatus::NullPointer;
    };
    let Ok(sample) = sample_arg(points, "data") else {
        return CvmsStatus::InvalidArgument;
    };
    match (*model).inner.cond_pred_cdf(&sample, t) {
        Ok(value) => {
            *out = value;
            CvmsStatus::Ok
        }
        Err(e) => set_error(e),
    }
}

/// Single-variable Bayesian loss of a submission against a pooled
/// dataset, deterministic in `seed`. Equals the focal agent's loss in a
/// two-agent mechanism run with the same seed.
///
/// # Safety
/// Pointer arguments as above.
#[no_mangle]
pub unsafe extern "C" fn cvms_loss_bayesian(
    model: *const CvmsModel,
    submission: *const f64,
    submission_len: usize,
    pooled: *const f64,
    pooled_len: usize,
    seed: u64,
    out_tau: *mut f64,
) -> CvmsStatus {
    if model.is_null() || out_tau.is_null() {
        return CvmsStatus::NullPointer;
    }
    let (Some(sub), Some(pool)) =
        (slice_arg(submission, submission_len), slice_arg(pooled, pooled_len))
    else {
        return CvmsStatus::NullPointer;
    };
    let (Ok(sub), Ok(pool)) = (sample_arg(sub, "submission"), sample_arg(pool, "pooled")) else {
        return CvmsStatus::InvalidArgument;
    };
    let mut rng = agent_stream(seed, 0);
    match loss_alg1(&(*model).inner, &sub, &pool, &mut rng) {
        Ok(report) => {
            *out_tau = report.tau;
            CvmsStatus::Ok
        }
        Err(e) => set_error(e),
    }
}

/// Prior-agnostic loss of a submission against a pooled dataset with a
/// constant augmentation size, deterministic in `seed`.
///
/// # Safety
/// Pointer arguments as above.
#[no_mangle]
pub unsafe extern "C" fn cvms_loss_prior_free(
    submission: *const f64,
    submission_len: usize,
    pooled: *const f64,
    pooled_len: usize,
    augment_size: usize,
    seed: u64,
    out_tau: *mut f64,
) -> CvmsStatus {
    if out_tau.is_null() {
        return CvmsStatus::NullPointer;
    }
    let (Some(sub), Some(pool)) =
        (slice_arg(submission, submission_len), slice_arg(pooled, pooled_len))
    else {
        return CvmsStatus::NullPointer;
    };
    for (name, points) in [("submission", sub), ("pooled", pool)] {
        if points.iter().any(|v| !v.is_finite()) {
            return set_error(format!("{name}: non-finite point"));
        }
    }
    let submissions = match SubmissionSet::new(vec![
        Submission { agent_id: 0, items: sub.iter().map(|&v| Item::Scalar(v)).collect() },
        Submission { agent_id: 1, items: pool.iter().map(|&v| Item::Scalar(v)).collect() },
    ]) {
        Ok(set) => set,
        Err(e) => return set_error(e),
    };
    let kappa = SplitMap::Constant { value: augment_size };
    let mut rng = agent_stream(seed, 0);
    match loss_alg3(&FeatureBank::identity(), &kappa, &submissions, 0, &mut rng) {
        Ok(report) => {
            *out_tau = report.tau;
            CvmsStatus::Ok
        }
        Err(e @ MechanismError::PooledTooSmall { .. }) => set_error(e),
        Err(e) => set_error(e),
    }
}
