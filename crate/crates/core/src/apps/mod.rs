//! Data-sharing applications built on top of the loss mechanisms:
//! budgeted data purchase, a data-collection marketplace, and federated
//! allocation.

mod federated;
mod marketplace;
mod purchase;

pub use federated::{federated_allocate, federated_alpha, FederatedAllocation, FederatedConfig};
pub use marketplace::{
    alpha_from_parts, estimate_expected_loss, finite_diff_sensitivity, marketplace_alpha,
    marketplace_round, optimal_quantity, recommended_profile, MarketAlpha, MarketplaceConfig,
};
pub use purchase::{purchase_payments, BudgetedPurchaseConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("expected {expected} loss reports, got {actual}")]
    ReportCountMismatch { expected: usize, actual: usize },
    #[error("valuation table has no entry for n={n}")]
    ValuationOutOfRange { n: usize },
    #[error(
        "market infeasible: per-agent marginal value {lhs:.6e} is below the collection cost {rhs:.6e}"
    )]
    MarketInfeasible { lhs: f64, rhs: f64 },
    #[error(
        "sensitivity not resolved; increase trials (estimate {mean:.3e}, standard error {se:.3e})"
    )]
    SensitivityUnresolved { mean: f64, se: f64 },
    #[error("expected truthful loss must be positive, got {value}")]
    NonPositiveLossEstimate { value: f64 },
    #[error("discounted value {value:.6} is outside the valuation's range")]
    ValueOutOfRange { value: f64 },
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

/// A valuation of data quantity. Shipped families are closed-form
/// invertible; tables invert by search with round-down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Valuation {
    /// `gamma * sqrt(n)`
    Sqrt { gamma: f64 },
    /// `gamma * ln(1 + n)`
    Log { gamma: f64 },
    /// `values[n]`
    Table { values: Vec<f64> },
}

impl Valuation {
    pub fn value(&self, n: usize) -> Result<f64, AppError> {
        match self {
            Valuation::Sqrt { gamma } => Ok(gamma * (n as f64).sqrt()),
            Valuation::Log { gamma } => Ok(gamma * (1.0 + n as f64).ln()),
            Valuation::Table { values } => {
                values.get(n).copied().ok_or(AppError::ValuationOutOfRange { n })
            }
        }
    }

    /// Largest count whose value does not exceed `y` (round-down inverse).
    /// `None` when `y` is below the value of zero data.
    pub fn inverse_floor(&self, y: f64, n_max: usize) -> Result<Option<usize>, AppError> {
        // Absolute slack absorbs round-trip float noise so that
        // inverse_floor(value(n)) == n exactly.
        const SLACK: f64 = 1e-9;
        if y + SLACK < self.value(0)? {
            return Ok(None);
        }
        match self {
            Valuation::Sqrt { gamma } => {
                let x = (y / gamma).max(0.0);
                Ok(Some(((x * x + SLACK).floor() as usize).min(n_max)))
            }
            Valuation::Log { gamma } => {
                let x = ((y / gamma).exp() - 1.0).max(0.0);
                Ok(Some(((x + SLACK).floor() as usize).min(n_max)))
            }
            Valuation::Table { values } => {
                let upper = n_max.min(values.len().saturating_sub(1));
                let best = values[..=upper]
                    .iter()
                    .enumerate()
                    .filter(|(_, &value)| value <= y + SLACK)
                    .map(|(n, _)| n)
                    .next_back();
                Ok(best)
            }
        }
    }

    pub fn validate_nondecreasing(&self, n_max: usize) -> Result<(), AppError> {
        for n in 1..=n_max {
            if self.value(n)? < self.value(n - 1)? {
                return Err(AppError::InvalidConfig {
                    reason: format!("valuation decreases at n={n}"),
                });
            }
        }
        Ok(())
    }

    pub fn validate_strictly_increasing(&self, n_max: usize) -> Result<(), AppError> {
        for n in 1..=n_max {
            if self.value(n)? <= self.value(n - 1)? {
                return Err(AppError::InvalidConfig {
                    reason: format!("valuation is not strictly increasing at n={n}"),
                });
            }
        }
        Ok(())
    }
}
