//! Budgeted data purchase: each agent is paid a share of the budget
//! discounted by their loss. Budget feasibility and nonnegativity follow
//! from the loss living in [0, 1].

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::mechanism::LossReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetedPurchaseConfig {
    pub budget: f64,
    pub agents: usize,
}

impl BudgetedPurchaseConfig {
    pub fn new(budget: f64, agents: usize) -> Result<Self, AppError> {
        if !budget.is_finite() || budget < 0.0 {
            return Err(AppError::InvalidConfig { reason: format!("budget must be >= 0, got {budget}") });
        }
        if agents < 2 {
            return Err(AppError::InvalidConfig { reason: format!("need at least 2 agents, got {agents}") });
        }
        Ok(Self { budget, agents })
    }
}

/// Pay agent `i` the amount `(budget / m) * (1 - tau_i)`.
pub fn purchase_payments(
    cfg: &BudgetedPurchaseConfig,
    reports: &[LossReport],
) -> Result<Vec<f64>, AppError> {
    if reports.len() != cfg.agents {
        return Err(AppError::ReportCountMismatch { expected: cfg.agents, actual: reports.len() });
    }
    let share = cfg.budget / cfg.agents as f64;
    Ok(reports.iter().map(|r| share * (1.0 - r.tau)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(tau: f64) -> LossReport {
        LossReport {
            agent_id: 0,
            tau,
            per_feature: vec![],
            eval_point_index: 0,
            submission_size: 0,
            augment_size: 0,
            comparison_size: 1,
        }
    }

    #[test]
    fn payment_examples() {
        let cfg = BudgetedPurchaseConfig::new(100.0, 10).unwrap();
        let reports: Vec<LossReport> =
            [0.0, 1.0, 0.25].iter().map(|&t| report(t)).chain((0..7).map(|_| report(0.5))).collect();
        let payments = purchase_payments(&cfg, &reports).unwrap();
        assert_eq!(payments[0], 10.0);
        assert_eq!(payments[1], 0.0);
        assert_eq!(payments[2], 7.5);
    }

    #[test]
    fn report_count_is_enforced() {
        let cfg = BudgetedPurchaseConfig::new(10.0, 3).unwrap();
        assert!(matches!(
            purchase_payments(&cfg, &[report(0.1)]),
            Err(AppError::ReportCountMismatch { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(BudgetedPurchaseConfig::new(-1.0, 5).is_err());
        assert!(BudgetedPurchaseConfig::new(f64::NAN, 5).is_err());
        assert!(BudgetedPurchaseConfig::new(1.0, 1).is_err());
    }

    proptest! {
        // Budget feasibility and individual rationality over arbitrary
        // loss vectors in [0,1]^m.
        #[test]
        fn payments_are_feasible_and_individually_rational(
            taus in proptest::collection::vec(0.0f64..=1.0, 2..12),
            budget in 0.0f64..1e6,
        ) {
            let cfg = BudgetedPurchaseConfig::new(budget, taus.len()).unwrap();
            let reports: Vec<LossReport> = taus.iter().map(|&t| report(t)).collect();
            let payments = purchase_payments(&cfg, &reports).unwrap();
            prop_assert!(payments.iter().all(|&p| p >= 0.0));
            prop_assert!(payments.iter().sum::<f64>() <= budget * (1.0 + 1e-12));
        }

        // Monotone punishment: a higher loss never earns a higher payment.
        #[test]
        fn payment_is_nonincreasing_in_tau(
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let cfg = BudgetedPurchaseConfig::new(50.0, 2).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let p = purchase_payments(&cfg, &[report(lo), report(hi)]).unwrap();
            prop_assert!(p[0] >= p[1]);
        }
    }
}
