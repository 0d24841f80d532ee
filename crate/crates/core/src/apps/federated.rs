//! Federated allocation: each agent receives a random subset of the
//! others' pooled data, sized so that a clean submission earns the whole
//! pool and the expected truthful utility lands halfway between going it
//! alone and the full pool.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AppError, Valuation};
use crate::features::Item;
use crate::mechanism::{LossReport, SubmissionSet};
use crate::sim::MonteCarloEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedConfig {
    /// Per-agent valuations of data quantity; strictly increasing.
    pub valuations: Vec<Valuation>,
    /// Monte-Carlo budget for the truthful-loss estimate behind alpha.
    pub estimation_trials: u64,
}

impl FederatedConfig {
    pub fn validate(&self, sizes: &[usize]) -> Result<(), AppError> {
        if self.valuations.len() != sizes.len() {
            return Err(AppError::InvalidConfig {
                reason: format!(
                    "{} valuations for {} agents",
                    self.valuations.len(),
                    sizes.len()
                ),
            });
        }
        let total: usize = sizes.iter().sum();
        for (i, &n) in sizes.iter().enumerate() {
            // Convenience assumption: every agent holds less than the rest
            // combined, so the alpha numerator stays positive.
            if n >= total - n {
                return Err(AppError::InvalidConfig {
                    reason: format!("agent {i} holds {n} points, at least as much as all others"),
                });
            }
            self.valuations[i].validate_strictly_increasing(total)?;
        }
        Ok(())
    }

    pub fn valuation(&self, agent: usize) -> Result<&Valuation, AppError> {
        self.valuations.get(agent).ok_or(AppError::InvalidConfig {
            reason: format!("no valuation for agent {agent}"),
        })
    }
}

/// The discount factor of the allocation rule:
/// `(1/2 - v_i(|X_i|) / (2 v_i(|Y_-i|))) / E[tau truthful]`.
pub fn federated_alpha(
    cfg: &FederatedConfig,
    agent: usize,
    sizes: &[usize],
    e_tau_truthful: &MonteCarloEstimate,
) -> Result<f64, AppError> {
    cfg.validate(sizes)?;
    if !e_tau_truthful.mean.is_finite() || e_tau_truthful.mean <= 0.0 {
        return Err(AppError::NonPositiveLossEstimate { value: e_tau_truthful.mean });
    }
    let valuation = cfg.valuation(agent)?;
    let others: usize = sizes.iter().enumerate().filter(|(j, _)| *j != agent).map(|(_, &n)| n).sum();
    let own_value = valuation.value(sizes[agent])?;
    let pool_value = valuation.value(others)?;
    Ok((0.5 - own_value / (2.0 * pool_value)) / e_tau_truthful.mean)
}

/// An allocation decision with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedAllocation {
    pub size: usize,
    pub deployed: Vec<Item>,
    /// Set when the discounted value fell below the value of zero data
    /// and the allocation was floored at zero.
    pub floored: bool,
}

/// Allocate agent `agent` a uniform random subset of the others' pooled
/// submissions of size `floor(v_i^{-1}((1 - alpha * tau_i) * v_i(|Y_-i|)))`.
pub fn federated_allocate<R: Rng>(
    cfg: &FederatedConfig,
    agent: usize,
    alpha: f64,
    submissions: &SubmissionSet,
    report: &LossReport,
    rng: &mut R,
) -> Result<FederatedAllocation, AppError> {
    let valuation = cfg.valuation(agent)?;
    let pooled = submissions.pooled_others(agent).map_err(crate::sim::SimError::from)?;
    let pool_value = valuation.value(pooled.len())?;
    let discounted = (1.0 - alpha * report.tau) * pool_value;

    let (size, floored) = match valuation.inverse_floor(discounted, pooled.len())? {
        Some(size) => (size.min(pooled.len()), false),
        None => (0, true),
    };
    let deployed = if size == 0 {
        Vec::new()
    } else {
        let picked = rand::seq::index::sample(rng, pooled.len(), size);
        picked.iter().map(|i| pooled[i].clone()).collect()
    };
    Ok(FederatedAllocation { size, deployed, floored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::Submission;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn estimate(mean: f64) -> MonteCarloEstimate {
        MonteCarloEstimate { mean, std_error: mean / 50.0, trials: 1000, master_seed: 0 }
    }

    fn sqrt_cfg(agents: usize) -> FederatedConfig {
        FederatedConfig {
            valuations: vec![Valuation::Sqrt { gamma: 1.0 }; agents],
            estimation_trials: 1000,
        }
    }

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
    fn federated_alpha_examples() {
        // v(n) = sqrt(n), |X_i| = 100, |Y_-i| = 400, E[tau] = 0.005:
        // alpha = (1/2 - 10/40) / 0.005 = 50.
        let cfg = sqrt_cfg(5);
        let sizes = [100, 100, 100, 100, 100];
        let alpha = federated_alpha(&cfg, 0, &sizes, &estimate(0.005)).unwrap();
        assert_relative_eq!(alpha, 50.0);

        // Halving the loss estimate doubles alpha.
        let double = federated_alpha(&cfg, 0, &sizes, &estimate(0.0025)).unwrap();
        assert_relative_eq!(double, 2.0 * alpha);

        // Own size approaching the pool drives alpha to zero.
        let near = [399, 100, 100, 100, 100];
        let alpha_near = federated_alpha(&cfg, 0, &near, &estimate(0.005)).unwrap();
        assert!(alpha_near < 0.26, "alpha {alpha_near}");

        assert!(matches!(
            federated_alpha(&cfg, 0, &sizes, &estimate(0.0)),
            Err(AppError::NonPositiveLossEstimate { .. })
        ));
    }

    #[test]
    fn validation_rejects_dominant_agents() {
        // The convenience assumption binds every agent, so two agents can
        // never satisfy it.
        let cfg = sqrt_cfg(2);
        assert!(matches!(cfg.validate(&[10, 10]), Err(AppError::InvalidConfig { .. })));
        assert!(matches!(cfg.validate(&[9, 10]), Err(AppError::InvalidConfig { .. })));
        let cfg = sqrt_cfg(3);
        assert!(cfg.validate(&[9, 10, 8]).is_ok());
        assert!(matches!(cfg.validate(&[20, 10, 8]), Err(AppError::InvalidConfig { .. })));
    }

    fn pool_of(n: usize) -> SubmissionSet {
        SubmissionSet::new(vec![
            Submission { agent_id: 0, items: vec![Item::Scalar(0.5); 10] },
            Submission { agent_id: 1, items: (0..n).map(|i| Item::Scalar(i as f64)).collect() },
        ])
        .unwrap()
    }

    #[test]
    fn federated_allocate_examples() {
        // v = sqrt, alpha = 50, tau = 0.005, pool of 400: the discounted
        // value is 0.75 * 20 = 15, so the allocation is 225.
        let cfg = sqrt_cfg(2);
        let submissions = pool_of(400);
        let mut rng = substream(0xFED, &[0]);
        let allocation =
            federated_allocate(&cfg, 0, 50.0, &submissions, &report(0.005), &mut rng).unwrap();
        assert_eq!(allocation.size, 225);
        assert_eq!(allocation.deployed.len(), 225);
        assert!(!allocation.floored);

        // A clean report earns exactly the whole pool.
        let allocation =
            federated_allocate(&cfg, 0, 50.0, &submissions, &report(0.0), &mut rng).unwrap();
        assert_eq!(allocation.size, 400);
        assert!(!allocation.floored);

        // Losses past the feasibility point floor the allocation at zero.
        let allocation =
            federated_allocate(&cfg, 0, 50.0, &submissions, &report(0.5), &mut rng).unwrap();
        assert_eq!(allocation.size, 0);
        assert!(allocation.deployed.is_empty());
        assert!(allocation.floored);
    }

    #[test]
    fn allocations_are_nonincreasing_in_tau() {
        let cfg = sqrt_cfg(2);
        let submissions = pool_of(100);
        let mut previous = usize::MAX;
        for step in 0..=20 {
            let tau = step as f64 / 20.0;
            let mut rng = substream(1, &[step as u64]);
            let allocation =
                federated_allocate(&cfg, 0, 3.0, &submissions, &report(tau), &mut rng).unwrap();
            assert!(allocation.size <= previous, "tau {tau}: {} > {previous}", allocation.size);
            previous = allocation.size;
        }
    }

    #[test]
    fn deployment_is_a_subset_of_the_pool() {
        let cfg = sqrt_cfg(2);
        let submissions = pool_of(50);
        let pooled = submissions.pooled_others(0).unwrap();
        let mut rng = substream(2, &[0]);
        let allocation =
            federated_allocate(&cfg, 0, 1.0, &submissions, &report(0.1), &mut rng).unwrap();
        for item in &allocation.deployed {
            assert!(pooled.contains(item));
        }
    }
}
