//! A marketplace that pays agents to collect data at a per-sample cost.
//!
//! The buyer's standalone optimum fixes the total collection target; the
//! per-agent payment discounts the equal share of the buyer's value by
//! `alpha * tau_i`, where `alpha` is calibrated so that, at the
//! recommended per-agent quantity, the marginal payment gain of one more
//! collected point just covers its cost.

use serde::{Deserialize, Serialize};

use super::{AppError, Valuation};
use crate::mechanism::LossReport;
use crate::sim::{coupled_size_losses, DataGenerator, LossMethod, MonteCarloEstimate, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketplaceConfig {
    /// Per-sample collection cost, > 0.
    pub cost: f64,
    /// The buyer's valuation of the total data quantity; nondecreasing
    /// on [0, n_max].
    pub valuation: Valuation,
    pub agents: usize,
    /// Search bound for the buyer's optimum.
    pub n_max: usize,
    /// Scenario used for all expectation estimates.
    pub generator: DataGenerator,
    pub method: LossMethod,
    /// Monte-Carlo budget for expectation and finite-difference estimates.
    pub trials: u64,
}

impl MarketplaceConfig {
    pub fn validate(&self) -> Result<(), AppError> {
        if !self.cost.is_finite() || self.cost <= 0.0 {
            return Err(AppError::InvalidConfig {
                reason: format!("per-sample cost must be > 0, got {}", self.cost),
            });
        }
        if self.agents < 2 {
            return Err(AppError::InvalidConfig {
                reason: format!("need at least 2 agents, got {}", self.agents),
            });
        }
        if self.n_max < 1 {
            return Err(AppError::InvalidConfig { reason: "n_max must be >= 1".to_string() });
        }
        if self.trials < 100 {
            return Err(AppError::InvalidConfig {
                reason: format!("marketplace estimation needs >= 100 trials, got {}", self.trials),
            });
        }
        self.valuation.validate_nondecreasing(self.n_max)?;
        Ok(())
    }
}

/// The buyer's standalone optimum `argmax_n V(n) - c*n` over `1..=n_max`,
/// ties broken toward smaller `n`.
pub fn optimal_quantity(cfg: &MarketplaceConfig) -> Result<usize, AppError> {
    cfg.validate()?;
    let mut best_n = 1;
    let mut best = cfg.valuation.value(1)? - cfg.cost;
    for n in 2..=cfg.n_max {
        let utility = cfg.valuation.value(n)? - cfg.cost * n as f64;
        if utility > best {
            best = utility;
            best_n = n;
        }
    }
    Ok(best_n)
}

/// Split the total target across agents: `floor(n*/m)` each, remainder
/// to the lowest-indexed agents, so the profile sums to `n*`.
pub fn recommended_profile(n_star: usize, agents: usize) -> Vec<usize> {
    let base = n_star / agents;
    let remainder = n_star % agents;
    (0..agents).map(|i| base + usize::from(i < remainder)).collect()
}

/// Expected truthful loss of `agent` under the given per-agent counts.
pub fn estimate_expected_loss(
    cfg: &MarketplaceConfig,
    n_profile: &[usize],
    agent: usize,
    trials: u64,
    master_seed: u64,
) -> Result<MonteCarloEstimate, AppError> {
    let strategies = vec![Strategy::Truthful; n_profile.len()];
    Ok(crate::sim::expected_loss(
        &cfg.generator,
        n_profile,
        &strategies,
        &cfg.method,
        agent,
        trials,
        master_seed,
    )?)
}

/// Finite-difference sensitivity `E[tau(n + e_agent)] - E[tau(n)]`,
/// estimated with common random numbers: each trial evaluates both
/// profiles on shared scenario and mechanism draws, so the difference is
/// resolved at far lower variance than two independent estimates.
/// Typically negative: more truthful data lowers the expected loss.
pub fn finite_diff_sensitivity(
    cfg: &MarketplaceConfig,
    n_profile: &[usize],
    agent: usize,
    trials: u64,
    master_seed: u64,
) -> Result<MonteCarloEstimate, AppError> {
    let n = n_profile[agent];
    let rows = coupled_size_losses(
        &cfg.generator,
        n_profile,
        agent,
        &[n, n + 1],
        &cfg.method,
        trials,
        master_seed,
    )?;
    let diffs: Vec<f64> = rows.iter().map(|row| row[1] - row[0]).collect();
    Ok(MonteCarloEstimate::from_values(&diffs, master_seed)?)
}

/// The calibrated discount factor. With sensitivity `s < 0`:
/// `alpha = -c * m / (s * V(n*))`.
pub fn alpha_from_parts(cost: f64, agents: usize, sensitivity: f64, value_at_opt: f64) -> f64 {
    -cost * agents as f64 / (sensitivity * value_at_opt)
}

/// A fully calibrated marketplace: the target quantity, the recommended
/// profile, the measured sensitivity, and the discount factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketAlpha {
    pub alpha: f64,
    pub n_star: usize,
    pub profile: Vec<usize>,
    pub value_at_opt: f64,
    pub sensitivity: MonteCarloEstimate,
}

/// Calibrate `alpha` at the recommended profile. Fails when the
/// sensitivity's sign is not resolved at two standard errors, or when
/// the market is infeasible (the marginal payment gain cannot cover the
/// collection cost).
pub fn marketplace_alpha(cfg: &MarketplaceConfig, master_seed: u64) -> Result<MarketAlpha, AppError> {
    let n_star = optimal_quantity(cfg)?;
    let profile = recommended_profile(n_star, cfg.agents);
    let sensitivity = finite_diff_sensitivity(cfg, &profile, 0, cfg.trials, master_seed)?;
    if sensitivity.mean >= 0.0 || sensitivity.mean.abs() < 2.0 * sensitivity.std_error {
        return Err(AppError::SensitivityUnresolved {
            mean: sensitivity.mean,
            se: sensitivity.std_error,
        });
    }
    let value_at_opt = cfg.valuation.value(n_star)?;
    let lhs = value_at_opt / cfg.agents as f64 * (-sensitivity.mean);
    if lhs < cfg.cost {
        return Err(AppError::MarketInfeasible { lhs, rhs: cfg.cost });
    }
    let alpha = alpha_from_parts(cfg.cost, cfg.agents, sensitivity.mean, value_at_opt);
    Ok(MarketAlpha { alpha, n_star, profile, value_at_opt, sensitivity })
}

/// Pay each agent `(V(n*)/m) * (1 - alpha * tau_i)` and charge the buyer
/// the sum.
pub fn marketplace_round(
    cfg: &MarketplaceConfig,
    calibration: &MarketAlpha,
    reports: &[LossReport],
) -> Result<(Vec<f64>, f64), AppError> {
    if reports.len() != cfg.agents {
        return Err(AppError::ReportCountMismatch { expected: cfg.agents, actual: reports.len() });
    }
    let share = calibration.value_at_opt / cfg.agents as f64;
    let payments: Vec<f64> =
        reports.iter().map(|r| share * (1.0 - calibration.alpha * r.tau)).collect();
    let charge = payments.iter().sum();
    Ok((payments, charge))
}
