//! Conjugate Bayesian models with closed-form posterior-predictive CDFs.
//!
//! Each model evaluates `P(Z <= t | data, t)` for a fresh draw `Z` under
//! the posterior predictive, where the conditioning multiset is the
//! caller's responsibility: the mechanism layer passes the submission
//! together with the evaluation point, and this module never guesses
//! whether the evaluation point is included.
//!
//! Both shipped models are non-degenerate: an additional observation
//! always changes the posterior-predictive probability (the normal
//! posterior precision and the beta pseudo-counts both grow with every
//! point), so data sharing stays informative.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::Sample;

#[derive(Debug, Error, PartialEq)]
pub enum BayesError {
    #[error("invalid model parameter {name}: {value} (must be > 0)")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("data point at index {index} is not binary: {value}")]
    NotBinary { index: usize, value: f64 },
    #[error("evaluation point is not binary: {value}")]
    NotBinaryEvalPoint { value: f64 },
}

/// Standard normal CDF with absolute error below 1e-12 for |z| <= 8,
/// evaluated through the complementary error function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn snap_binary(value: f64) -> Option<f64> {
    if (value - 0.0).abs() <= 1e-12 {
        Some(0.0)
    } else if (value - 1.0).abs() <= 1e-12 {
        Some(1.0)
    } else {
        None
    }
}

/// Normal likelihood with known observation variance and a normal prior
/// on the mean: mean ~ N(prior_mean, prior_var), X | mean ~ N(mean, obs_var).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalNormalModel {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub obs_var: f64,
}

impl NormalNormalModel {
    pub fn new(prior_mean: f64, prior_var: f64, obs_var: f64) -> Result<Self, BayesError> {
        if !prior_var.is_finite() || prior_var <= 0.0 {
            return Err(BayesError::NonPositiveParameter { name: "prior_var", value: prior_var });
        }
        if !obs_var.is_finite() || obs_var <= 0.0 {
            return Err(BayesError::NonPositiveParameter { name: "obs_var", value: obs_var });
        }
        Ok(Self { prior_mean, prior_var, obs_var })
    }

    /// Posterior mean and variance of the latent mean given a conditioning
    /// multiset (which may be empty: the prior is returned unchanged).
    /// Callers conditioning on an evaluation point include it themselves.
    pub fn posterior_params(&self, conditioning: &Sample) -> (f64, f64) {
        let k = conditioning.len() as f64;
        let precision = 1.0 / self.prior_var + k / self.obs_var;
        let mean = (self.prior_mean / self.prior_var + conditioning.sum() / self.obs_var) / precision;
        (mean, 1.0 / precision)
    }

    /// `P(Z <= t | data, t)` for a fresh posterior-predictive draw `Z`,
    /// conditioning on `data ∪ {t}`.
    pub fn cond_pred_cdf(&self, data: &Sample, t: f64) -> f64 {
        let k = data.len() as f64 + 1.0;
        let precision = 1.0 / self.prior_var + k / self.obs_var;
        let mean = (self.prior_mean / self.prior_var + (data.sum() + t) / self.obs_var) / precision;
        let var = 1.0 / precision;
        std_normal_cdf((t - mean) / (self.obs_var + var).sqrt())
    }
}

/// Bernoulli likelihood with a beta prior: p ~ Beta(alpha, beta),
/// X | p ~ Bernoulli(p). Data points must be 0 or 1 (values within 1e-12
/// of an endpoint are snapped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBernoulliModel {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaBernoulliModel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, BayesError> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(BayesError::NonPositiveParameter { name: "alpha", value: alpha });
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(BayesError::NonPositiveParameter { name: "beta", value: beta });
        }
        Ok(Self { alpha, beta })
    }

    /// `P(Z <= t | data, t)` where `data` and `t` are binary. Conditioning
    /// includes `t`, giving `t + (1-t) * (beta + (n+1) - sum) / (alpha + beta + n + 1)`
    /// with `n = |data|` and `sum = Σ data`.
    pub fn cond_pred_cdf(&self, data: &Sample, t: f64) -> Result<f64, BayesError> {
        let t = snap_binary(t).ok_or(BayesError::NotBinaryEvalPoint { value: t })?;
        let mut sum = 0.0;
        for (index, value) in data.iter().enumerate() {
            sum += snap_binary(value).ok_or(BayesError::NotBinary { index, value })?;
        }
        let n = data.len() as f64;
        Ok(t + (1.0 - t) * (self.beta + (n + 1.0) - sum) / (self.alpha + self.beta + n + 1.0))
    }
}

/// A prior with a posterior-predictive CDF evaluator. The two conjugate
/// models ship; the enum is the seam for further models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PosteriorModel {
    NormalNormal(NormalNormalModel),
    BetaBernoulli(BetaBernoulliModel),
}

impl PosteriorModel {
    /// `P(Z <= t | data, t)`, always in [0, 1].
    pub fn cond_pred_cdf(&self, data: &Sample, t: f64) -> Result<f64, BayesError> {
        match self {
            PosteriorModel::NormalNormal(m) => Ok(m.cond_pred_cdf(data, t)),
            PosteriorModel::BetaBernoulli(m) => m.cond_pred_cdf(data, t),
        }
    }

    /// Draw the latent parameter (the normal mean or the Bernoulli rate)
    /// from the prior.
    pub fn draw_latent<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            PosteriorModel::NormalNormal(m) => {
                let prior = rand_distr::Normal::new(m.prior_mean, m.prior_var.sqrt())
                    .expect("validated prior parameters");
                prior.sample(rng)
            }
            PosteriorModel::BetaBernoulli(m) => {
                let prior =
                    rand_distr::Beta::new(m.alpha, m.beta).expect("validated beta parameters");
                prior.sample(rng)
            }
        }
    }

    /// Draw `n` i.i.d. points from the distribution selected by `latent`.
    pub fn draw_data<R: Rng>(&self, latent: f64, n: usize, rng: &mut R) -> Sample {
        match self {
            PosteriorModel::NormalNormal(m) => {
                let obs = rand_distr::Normal::new(latent, m.obs_var.sqrt())
                    .expect("validated observation variance");
                let points = (0..n).map(|_| obs.sample(rng)).collect();
                Sample::new(points).expect("normal draws are finite")
            }
            PosteriorModel::BetaBernoulli(_) => {
                let points = (0..n)
                    .map(|_| if rng.random::<f64>() < latent { 1.0 } else { 0.0 })
                    .collect();
                Sample::new(points).expect("bernoulli draws are finite")
            }
        }
    }

    /// Draw the latent parameter from the prior, then `n` i.i.d. points
    /// from the sampled distribution. Deterministic given the stream.
    pub fn sample_prior_then_data<R: Rng>(&self, n: usize, rng: &mut R) -> (f64, Sample) {
        let latent = self.draw_latent(rng);
        let data = self.draw_data(latent, n, rng);
        (latent, data)
    }

    /// True whether the model's dataspace is {0,1} rather than all of R.
    pub fn is_binary(&self) -> bool {
        matches!(self, PosteriorModel::BetaBernoulli(_))
    }
}
