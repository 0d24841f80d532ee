//! The three loss mechanisms.
//!
//! For each agent the pooled submission of the others is reduced to an
//! evaluation point, an optional augmentation set, and a comparison set.
//! The agent's loss is a squared difference of two estimates of the
//! comparison ECDF at the evaluation point:
//!
//! * single-variable Bayesian: posterior-predictive CDF conditioned on
//!   the agent's submission versus the comparison ECDF;
//! * feature-based Bayesian: the same, repeated per feature map and
//!   averaged;
//! * prior-agnostic: the ECDF of submission ∪ augmentation versus the
//!   comparison ECDF, per feature, averaged.
//!
//! Every loss lies in [0, 1]. Per-agent randomness comes from streams
//! derived from the run seed and the agent's stable id, so adding an
//! agent never perturbs the draws of the others.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{BayesError, PosteriorModel};
use crate::features::{FeatureBank, FeatureError, Item};
use crate::rng::agent_stream;
use crate::stats::{Ecdf, Sample, StatsError};

#[derive(Debug, Error, PartialEq)]
pub enum MechanismError {
    #[error("split map value {kappa}(n={n}) violates kappa(n) <= n-2")]
    SplitMapTooLarge { kappa: usize, n: usize },
    #[error("split map table has no entry for n={n}")]
    SplitMapTableMissing { n: usize },
    #[error("pooled data has {size} points but the mechanism needs at least {required}")]
    PooledTooSmall { size: usize, required: usize },
    #[error(
        "agent {agent_id}: submission and augmentation are both empty; \
         undefined ECDF; supply kappa > 0 or a nonempty submission"
    )]
    EmptyAugmentedSubmission { agent_id: u64 },
    #[error("agent index {index} out of range ({len} agents)")]
    AgentOutOfRange { index: usize, len: usize },
    #[error("a submission set needs at least two agents, got {m}")]
    TooFewAgents { m: usize },
    #[error("duplicate agent id {id}")]
    DuplicateAgentId { id: u64 },
    #[error("mixed item representations: all items in a run must be scalars or all vectors of one dimension")]
    MixedRepresentation,
    #[error("this mechanism requires scalar data")]
    RequiresScalarData,
    #[error("mechanism mode requires a posterior model")]
    MissingModel,
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// The split map for the prior-agnostic mechanism: how many pooled points
/// augment the agent's submission. Must satisfy `kappa(n) <= n - 2` so the
/// comparison set stays nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitMap {
    /// A constant augmentation size; `Constant(0)` is the default.
    Constant { value: usize },
    /// Largest `w` with `w <= (n-1)/2`, approximately balancing
    /// submission-plus-augmentation against the comparison set.
    Balance,
    /// Explicit per-`n` table: entry `n` gives `kappa(n)`.
    Table { values: Vec<usize> },
}

impl SplitMap {
    pub fn zero() -> Self {
        SplitMap::Constant { value: 0 }
    }

    /// Evaluate `kappa(n)`, rejecting values above `n - 2`.
    pub fn evaluate(&self, n: usize) -> Result<usize, MechanismError> {
        let kappa = match self {
            SplitMap::Constant { value } => *value,
            SplitMap::Balance => (n.saturating_sub(1)) / 2,
            SplitMap::Table { values } => *values
                .get(n)
                .ok_or(MechanismError::SplitMapTableMissing { n })?,
        };
        if n < 2 || kappa > n - 2 {
            return Err(MechanismError::SplitMapTooLarge { kappa, n });
        }
        Ok(kappa)
    }
}

/// One agent's dataset submission, keyed by a stable id. Per-agent
/// randomness is derived from the id, not the position in the set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub agent_id: u64,
    pub items: Vec<Item>,
}

/// The submissions of all agents for one mechanism run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionSet {
    submissions: Vec<Submission>,
}

impl SubmissionSet {
    pub fn new(submissions: Vec<Submission>) -> Result<Self, MechanismError> {
        if submissions.len() < 2 {
            return Err(MechanismError::TooFewAgents { m: submissions.len() });
        }
        let mut ids: Vec<u64> = submissions.iter().map(|s| s.agent_id).collect();
        ids.sort_unstable();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(MechanismError::DuplicateAgentId { id: pair[0] });
            }
        }
        // One representation for the whole pooled dataspace.
        let mut reference: Option<Option<usize>> = None;
        for submission in &submissions {
            for item in &submission.items {
                let dim = item.dimension();
                match reference {
                    None => reference = Some(dim),
                    Some(r) if r != dim => return Err(MechanismError::MixedRepresentation),
                    Some(_) => {}
                }
            }
        }
        Ok(Self { submissions })
    }

    /// Build from bare datasets, assigning ids by position.
    pub fn from_datasets(datasets: Vec<Vec<Item>>) -> Result<Self, MechanismError> {
        Self::new(
            datasets
                .into_iter()
                .enumerate()
                .map(|(i, items)| Submission { agent_id: i as u64, items })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.submissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.submissions.is_empty()
    }

    pub fn agents(&self) -> &[Submission] {
        &self.submissions
    }

    pub fn agent(&self, index: usize) -> Result<&Submission, MechanismError> {
        self.submissions
            .get(index)
            .ok_or(MechanismError::AgentOutOfRange { index, len: self.submissions.len() })
    }

    /// Pooled submissions of everyone except `index`, concatenated in
    /// ascending agent-id order so the pooled list does not depend on
    /// the order submissions were handed in.
    pub fn pooled_others(&self, index: usize) -> Result<Vec<Item>, MechanismError> {
        self.agent(index)?;
        let mut others: Vec<&Submission> = self
            .submissions
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != index)
            .map(|(_, s)| s)
            .collect();
        others.sort_by_key(|s| s.agent_id);
        Ok(others.iter().flat_map(|s| s.items.iter().cloned()).collect())
    }
}

/// Outcome of splitting a pooled dataset for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSplit {
    /// Index of the evaluation point within the pooled list.
    pub eval_index: usize,
    pub eval_point: Item,
    pub augment: Vec<Item>,
    pub comparison: Vec<Item>,
}

/// Uniformly select the evaluation point; the rest is the comparison set.
pub fn select_eval_point<R: Rng>(pooled: &[Item], rng: &mut R) -> Result<PooledSplit, MechanismError> {
    if pooled.len() < 2 {
        return Err(MechanismError::PooledTooSmall { size: pooled.len(), required: 2 });
    }
    let eval_index = rng.random_range(0..pooled.len());
    let comparison = pooled
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != eval_index)
        .map(|(_, item)| item.clone())
        .collect();
    Ok(PooledSplit {
        eval_index,
        eval_point: pooled[eval_index].clone(),
        augment: Vec::new(),
        comparison,
    })
}

/// Uniformly random partition into evaluation point, augmentation set of
/// size `kappa(n)`, and comparison set.
pub fn split_pooled<R: Rng>(
    pooled: &[Item],
    kappa: &SplitMap,
    rng: &mut R,
) -> Result<PooledSplit, MechanismError> {
    let n = pooled.len();
    if n < 2 {
        return Err(MechanismError::PooledTooSmall { size: n, required: 2 });
    }
    let w = kappa.evaluate(n)?;
    let required = 2 + w;
    if n < required {
        return Err(MechanismError::PooledTooSmall { size: n, required });
    }
    if w == 0 {
        return select_eval_point(pooled, rng);
    }
    // `index::sample` returns distinct indices in fully shuffled order, so
    // the first is uniform and the next `w` are a uniform subset of the rest.
    let picked = rand::seq::index::sample(rng, n, 1 + w);
    let eval_index = picked.index(0);
    let mut selected = vec![false; n];
    for i in picked.iter() {
        selected[i] = true;
    }
    let augment = picked.iter().skip(1).map(|i| pooled[i].clone()).collect();
    let comparison = pooled
        .iter()
        .enumerate()
        .filter(|(i, _)| !selected[*i])
        .map(|(_, item)| item.clone())
        .collect();
    Ok(PooledSplit { eval_index, eval_point: pooled[eval_index].clone(), augment, comparison })
}

/// Per-feature component of a loss report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLoss {
    pub feature: usize,
    pub tau: f64,
    /// Featurized evaluation point this component was scored at.
    pub eval_value: f64,
}

/// One agent's loss with enough provenance to recompute every number:
/// the evaluation point's position in the pooled list and the sizes of
/// the three parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub agent_id: u64,
    /// Mean of the per-feature losses; always in [0, 1].
    pub tau: f64,
    pub per_feature: Vec<FeatureLoss>,
    pub eval_point_index: usize,
    pub submission_size: usize,
    pub augment_size: usize,
    pub comparison_size: usize,
}

/// Single-variable Bayesian loss on scalar data: the squared difference
/// between the posterior-predictive CDF given (submission, T) and the
/// comparison ECDF at T.
pub fn loss_alg1<R: Rng>(
    model: &PosteriorModel,
    submission: &Sample,
    pooled: &Sample,
    rng: &mut R,
) -> Result<LossReport, MechanismError> {
    let items: Vec<Item> = pooled.iter().map(Item::Scalar).collect();
    let split = select_eval_point(&items, rng)?;
    let t = split.eval_point.as_scalar().expect("scalar pooled data");
    let comparison: Vec<f64> =
        split.comparison.iter().map(|i| i.as_scalar().expect("scalar pooled data")).collect();
    let f_z = Ecdf::from_points(&comparison)?.evaluate(t);
    let cond = model.cond_pred_cdf(submission, t)?;
    let tau = (cond - f_z) * (cond - f_z);
    Ok(LossReport {
        agent_id: 0,
        tau,
        per_feature: vec![FeatureLoss { feature: 0, tau, eval_value: t }],
        eval_point_index: split.eval_index,
        submission_size: submission.len(),
        augment_size: 0,
        comparison_size: comparison.len(),
    })
}

fn scalar_sample(items: &[Item]) -> Result<Sample, MechanismError> {
    let points = items
        .iter()
        .map(|i| i.as_scalar().ok_or(MechanismError::RequiresScalarData))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Sample::new(points)?)
}

/// Feature-based Bayesian loss. One evaluation point is drawn per agent
/// and shared across features; the conditional expectation conditions on
/// the agent's raw (scalar) submission and the featurized evaluation point.
pub fn loss_alg2<R: Rng>(
    model: &PosteriorModel,
    bank: &FeatureBank,
    submissions: &SubmissionSet,
    agent_index: usize,
    rng: &mut R,
) -> Result<LossReport, MechanismError> {
    let agent = submissions.agent(agent_index)?;
    let submission = scalar_sample(&agent.items)?;
    let pooled = submissions.pooled_others(agent_index)?;
    let split = select_eval_point(&pooled, rng)?;

    let mut per_feature = Vec::with_capacity(bank.len());
    let mut total = 0.0;
    for k in 0..bank.len() {
        let t_k = bank.apply_feature(k, &split.eval_point)?;
        let z_k = bank.featurize_dataset(k, &split.comparison)?;
        let f_z = Ecdf::new(&z_k)?.evaluate(t_k);
        let cond = model.cond_pred_cdf(&submission, t_k)?;
        let tau_k = (cond - f_z) * (cond - f_z);
        total += tau_k;
        per_feature.push(FeatureLoss { feature: k, tau: tau_k, eval_value: t_k });
    }
    Ok(LossReport {
        agent_id: agent.agent_id,
        tau: total / bank.len() as f64,
        per_feature,
        eval_point_index: split.eval_index,
        submission_size: agent.items.len(),
        augment_size: 0,
        comparison_size: split.comparison.len(),
    })
}

/// Prior-agnostic loss: the submission-plus-augmentation ECDF versus the
/// comparison ECDF, per feature, at a shared evaluation point.
pub fn loss_alg3<R: Rng>(
    bank: &FeatureBank,
    kappa: &SplitMap,
    submissions: &SubmissionSet,
    agent_index: usize,
    rng: &mut R,
) -> Result<LossReport, MechanismError> {
    let agent = submissions.agent(agent_index)?;
    let pooled = submissions.pooled_others(agent_index)?;
    let split = split_pooled(&pooled, kappa, rng)?;

    if agent.items.is_empty() && split.augment.is_empty() {
        return Err(MechanismError::EmptyAugmentedSubmission { agent_id: agent.agent_id });
    }
    let augmented: Vec<Item> =
        agent.items.iter().chain(split.augment.iter()).cloned().collect();

    let mut per_feature = Vec::with_capacity(bank.len());
    let mut total = 0.0;
    for k in 0..bank.len() {
        let t_k = bank.apply_feature(k, &split.eval_point)?;
        let y_k = bank.featurize_dataset(k, &augmented)?;
        let z_k = bank.featurize_dataset(k, &split.comparison)?;
        let f_y = Ecdf::new(&y_k)?.evaluate(t_k);
        let f_z = Ecdf::new(&z_k)?.evaluate(t_k);
        let tau_k = (f_y - f_z) * (f_y - f_z);
        total += tau_k;
        per_feature.push(FeatureLoss { feature: k, tau: tau_k, eval_value: t_k });
    }
    Ok(LossReport {
        agent_id: agent.agent_id,
        tau: total / bank.len() as f64,
        per_feature,
        eval_point_index: split.eval_index,
        submission_size: agent.items.len(),
        augment_size: split.augment.len(),
        comparison_size: split.comparison.len(),
    })
}

/// Which loss the mechanism computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismMode {
    Alg1,
    Alg2,
    Alg3,
}

/// Everything needed to run a mechanism deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub mode: MechanismMode,
    pub model: Option<PosteriorModel>,
    pub bank: FeatureBank,
    pub kappa: SplitMap,
}

impl MechanismConfig {
    pub fn alg1(model: PosteriorModel) -> Self {
        Self { mode: MechanismMode::Alg1, model: Some(model), bank: FeatureBank::identity(), kappa: SplitMap::zero() }
    }

    pub fn alg2(model: PosteriorModel, bank: FeatureBank) -> Self {
        Self { mode: MechanismMode::Alg2, model: Some(model), bank, kappa: SplitMap::zero() }
    }

    pub fn alg3(bank: FeatureBank, kappa: SplitMap) -> Self {
        Self { mode: MechanismMode::Alg3, model: None, bank, kappa }
    }

    fn model(&self) -> Result<&PosteriorModel, MechanismError> {
        self.model.as_ref().ok_or(MechanismError::MissingModel)
    }
}

/// Compute one agent's loss with caller-provided randomness.
pub fn agent_loss<R: Rng>(
    cfg: &MechanismConfig,
    submissions: &SubmissionSet,
    agent_index: usize,
    rng: &mut R,
) -> Result<LossReport, MechanismError> {
    match cfg.mode {
        MechanismMode::Alg1 => {
            let agent = submissions.agent(agent_index)?;
            let submission = scalar_sample(&agent.items)?;
            let pooled = scalar_sample(&submissions.pooled_others(agent_index)?)?;
            let mut report = loss_alg1(cfg.model()?, &submission, &pooled, rng)?;
            report.agent_id = agent.agent_id;
            Ok(report)
        }
        MechanismMode::Alg2 => loss_alg2(cfg.model()?, &cfg.bank, submissions, agent_index, rng),
        MechanismMode::Alg3 => loss_alg3(&cfg.bank, &cfg.kappa, submissions, agent_index, rng),
    }
}

/// Run the mechanism for every agent. Each agent's randomness is an
/// independent stream keyed by (seed, agent id), so reports are identical
/// whether agents are evaluated sequentially or in parallel, and
/// permuting the submission order only permutes the reports.
pub fn run_mechanism(
    cfg: &MechanismConfig,
    submissions: &SubmissionSet,
    master_seed: u64,
) -> Result<Vec<LossReport>, MechanismError> {
    submissions
        .agents()
        .iter()
        .enumerate()
        .map(|(index, submission)| {
            let mut rng = agent_stream(master_seed, submission.agent_id);
            agent_loss(cfg, submissions, index, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::BetaBernoulliModel;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scalar_items(points: &[f64]) -> Vec<Item> {
        points.iter().map(|&p| Item::Scalar(p)).collect()
    }

    fn bb22() -> PosteriorModel {
        PosteriorModel::BetaBernoulli(BetaBernoulliModel::new(2.0, 2.0).unwrap())
    }

    /// Find a seed whose first selection from `pooled` picks `want`.
    fn seed_forcing_eval(pooled: &[Item], want: f64) -> u64 {
        for seed in 0..10_000 {
            let mut rng = substream(seed, &[0]);
            let split = select_eval_point(pooled, &mut rng).unwrap();
            if split.eval_point.as_scalar() == Some(want) {
                return seed;
            }
        }
        panic!("no seed forces evaluation point {want}");
    }

    #[test]
    fn split_sizes_bookkeeping() {
        let pooled = scalar_items(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut rng = substream(1, &[0]);
        let split = split_pooled(&pooled, &SplitMap::zero(), &mut rng).unwrap();
        assert_eq!(split.augment.len(), 0);
        assert_eq!(split.comparison.len(), 4);

        let pooled: Vec<Item> = scalar_items(&[0.0; 10]);
        let mut rng = substream(2, &[0]);
        let split = split_pooled(&pooled, &SplitMap::Constant { value: 4 }, &mut rng).unwrap();
        assert_eq!(split.augment.len(), 4);
        assert_eq!(split.comparison.len(), 5);
    }

    #[test]
    fn split_map_validation() {
        // kappa(n) = n - 1 violates kappa(n) < n - 1.
        let pooled = scalar_items(&[1.0, 2.0, 3.0]);
        let mut rng = substream(3, &[0]);
        let err = split_pooled(&pooled, &SplitMap::Constant { value: 2 }, &mut rng).unwrap_err();
        assert!(matches!(err, MechanismError::SplitMapTooLarge { kappa: 2, n: 3 }));

        assert_eq!(SplitMap::Balance.evaluate(10).unwrap(), 4);
        assert!(SplitMap::Table { values: vec![0, 0, 0] }.evaluate(7).is_err());
    }

    #[test]
    fn select_eval_point_edge_cases() {
        let single = scalar_items(&[1.0]);
        let mut rng = substream(4, &[0]);
        assert!(matches!(
            select_eval_point(&single, &mut rng),
            Err(MechanismError::PooledTooSmall { size: 1, required: 2 })
        ));

        let pair = scalar_items(&[1.0, 2.0]);
        let split = select_eval_point(&pair, &mut rng).unwrap();
        assert_eq!(split.comparison.len(), 1);
    }

    #[test]
    fn select_eval_point_is_uniform() {
        let pooled = scalar_items(&[10.0, 20.0, 30.0, 40.0]);
        let mut counts = [0u32; 4];
        for seed in 0..100_000u64 {
            let mut rng = substream(seed, &[7]);
            let split = select_eval_point(&pooled, &mut rng).unwrap();
            counts[split.eval_index] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / 100_000.0;
            assert!((freq - 0.25).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn loss_alg1_hand_examples() {
        let model = bb22();
        let submission = Sample::new(vec![1.0, 1.0]).unwrap();
        let pooled = Sample::new(vec![1.0, 0.0]).unwrap();
        let pooled_items = scalar_items(pooled.points());

        // T = 1: conditional expectation 1, F_Z(1) = 1 over Z = {0}.
        let seed = seed_forcing_eval(&pooled_items, 1.0);
        let mut rng = substream(seed, &[0]);
        let report = loss_alg1(&model, &submission, &pooled, &mut rng).unwrap();
        assert_eq!(report.tau, 0.0);

        // T = 0: conditional expectation 3/7, F_Z(0) = 0 over Z = {1}.
        let seed = seed_forcing_eval(&pooled_items, 0.0);
        let mut rng = substream(seed, &[0]);
        let report = loss_alg1(&model, &submission, &pooled, &mut rng).unwrap();
        assert_relative_eq!(report.tau, 9.0 / 49.0, epsilon = 1e-15);
        assert_eq!(report.comparison_size, 1);
        assert_eq!(report.submission_size, 2);
    }

    #[test]
    fn loss_alg2_identity_reduces_to_alg1() {
        let model = bb22();
        let submissions = SubmissionSet::from_datasets(vec![
            scalar_items(&[1.0, 1.0, 0.0]),
            scalar_items(&[0.0, 1.0]),
            scalar_items(&[1.0, 0.0, 0.0]),
        ])
        .unwrap();
        let bank = FeatureBank::identity();
        for seed in 0..20u64 {
            let mut rng_a = substream(seed, &[0]);
            let report_a =
                loss_alg2(&model, &bank, &submissions, 0, &mut rng_a).unwrap();

            let submission = Sample::new(vec![1.0, 1.0, 0.0]).unwrap();
            let pooled = scalar_sample(&submissions.pooled_others(0).unwrap()).unwrap();
            let mut rng_b = substream(seed, &[0]);
            let report_b = loss_alg1(&model, &submission, &pooled, &mut rng_b).unwrap();
            assert_eq!(report_a.tau.to_bits(), report_b.tau.to_bits());
            assert_eq!(report_a.eval_point_index, report_b.eval_point_index);
        }
    }

    // Golden value: verified once against a Monte-Carlo posterior draw of
    // the conditional expectation, then frozen. The seed search pins the
    // informative branch (evaluation point 0), where the value is
    // (5/9 - 2/5)^2 = 49/2025.
    #[test]
    fn loss_alg2_regression_lock() {
        let model = bb22();
        let submissions = SubmissionSet::from_datasets(vec![
            scalar_items(&[1.0, 0.0, 1.0, 0.0]),
            scalar_items(&[1.0, 1.0, 0.0]),
            scalar_items(&[0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let seed = seed_forcing_eval(&submissions.pooled_others(0).unwrap(), 0.0);
        let mut rng = substream(seed, &[0]);
        let report = loss_alg2(&model, &FeatureBank::identity(), &submissions, 0, &mut rng).unwrap();

        // Independent reconstruction from the report provenance.
        let pooled = submissions.pooled_others(0).unwrap();
        let t = pooled[report.eval_point_index].as_scalar().unwrap();
        let z: Vec<f64> = pooled
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != report.eval_point_index)
            .map(|(_, item)| item.as_scalar().unwrap())
            .collect();
        let f_z = crate::stats::ecdf_at(&z, t).unwrap();
        let cond = model
            .cond_pred_cdf(&Sample::new(vec![1.0, 0.0, 1.0, 0.0]).unwrap(), t)
            .unwrap();
        assert_relative_eq!(report.tau, (cond - f_z) * (cond - f_z), epsilon = 1e-15);
        assert_relative_eq!(report.tau, GOLDEN_ALG2_TAU, epsilon = 1e-15);
    }
    // Frozen after the first verified run; see loss_alg2_regression_lock.
    const GOLDEN_ALG2_TAU: f64 = 0.024_197_530_864_197_537;

    #[test]
    fn loss_alg3_hand_example() {
        // Submission {0.5}, pooled others {0.2, 0.8, 0.4}, kappa = 0.
        // With T = 0.4: Z = {0.2, 0.8}, F_Y(0.4) = 0, F_Z(0.4) = 1/2.
        let submissions = SubmissionSet::from_datasets(vec![
            scalar_items(&[0.5]),
            scalar_items(&[0.2, 0.8, 0.4]),
        ])
        .unwrap();
        let pooled = submissions.pooled_others(0).unwrap();
        let seed = seed_forcing_eval(&pooled, 0.4);
        let mut rng = substream(seed, &[0]);
        let report =
            loss_alg3(&FeatureBank::identity(), &SplitMap::zero(), &submissions, 0, &mut rng)
                .unwrap();
        assert_relative_eq!(report.tau, 0.25, epsilon = 1e-15);

        // Identical ECDF values at T give zero loss.
        let submissions = SubmissionSet::from_datasets(vec![
            scalar_items(&[0.2, 0.8]),
            scalar_items(&[0.2, 0.8, 5.0]),
        ])
        .unwrap();
        let pooled = submissions.pooled_others(0).unwrap();
        let seed = seed_forcing_eval(&pooled, 5.0);
        let mut rng = substream(seed, &[0]);
        let report =
            loss_alg3(&FeatureBank::identity(), &SplitMap::zero(), &submissions, 0, &mut rng)
                .unwrap();
        assert_eq!(report.tau, 0.0);
    }

    #[test]
    fn loss_alg3_rejects_empty_augmented_submission() {
        let submissions = SubmissionSet::from_datasets(vec![
            vec![],
            scalar_items(&[0.2, 0.8, 0.4]),
        ])
        .unwrap();
        let mut rng = substream(0, &[0]);
        let err =
            loss_alg3(&FeatureBank::identity(), &SplitMap::zero(), &submissions, 0, &mut rng)
                .unwrap_err();
        assert!(matches!(err, MechanismError::EmptyAugmentedSubmission { agent_id: 0 }));
    }

    #[test]
    fn run_mechanism_is_deterministic_and_keyed_by_agent_id() {
        let cfg = MechanismConfig::alg3(FeatureBank::identity(), SplitMap::zero());
        let a = Submission { agent_id: 10, items: scalar_items(&[0.1, 0.7, 0.3]) };
        let b = Submission { agent_id: 20, items: scalar_items(&[0.9, 0.2, 0.5]) };
        let c = Submission { agent_id: 30, items: scalar_items(&[0.4, 0.6, 0.8]) };

        let set = SubmissionSet::new(vec![a.clone(), b.clone(), c.clone()]).unwrap();
        let first = run_mechanism(&cfg, &set, 99).unwrap();
        let second = run_mechanism(&cfg, &set, 99).unwrap();
        assert_eq!(
            serde_json::to_string(&first).unwrap(),
            serde_json::to_string(&second).unwrap()
        );
        assert_eq!(first.len(), 3);

        // Permuting the agents permutes the reports but leaves each
        // agent's loss untouched.
        let permuted = SubmissionSet::new(vec![c, a, b]).unwrap();
        let reports = run_mechanism(&cfg, &permuted, 99).unwrap();
        for report in &reports {
            let original = first.iter().find(|r| r.agent_id == report.agent_id).unwrap();
            assert_eq!(report.tau.to_bits(), original.tau.to_bits());
            assert_eq!(report.eval_point_index, original.eval_point_index);
        }

        // Two symmetric identical submissions: one report per agent.
        let twins = SubmissionSet::from_datasets(vec![
            scalar_items(&[0.4, 0.6, 0.5]),
            scalar_items(&[0.4, 0.6, 0.5]),
        ])
        .unwrap();
        let reports = run_mechanism(&cfg, &twins, 7).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| (0.0..=1.0).contains(&r.tau)));
    }

    #[test]
    fn submission_set_validation() {
        assert!(matches!(
            SubmissionSet::from_datasets(vec![scalar_items(&[1.0])]),
            Err(MechanismError::TooFewAgents { m: 1 })
        ));
        let err = SubmissionSet::new(vec![
            Submission { agent_id: 1, items: scalar_items(&[1.0]) },
            Submission { agent_id: 1, items: scalar_items(&[2.0]) },
        ])
        .unwrap_err();
        assert!(matches!(err, MechanismError::DuplicateAgentId { id: 1 }));

        let err = SubmissionSet::from_datasets(vec![
            scalar_items(&[1.0]),
            vec![Item::vector(vec![1.0, 2.0]).unwrap()],
        ])
        .unwrap_err();
        assert!(matches!(err, MechanismError::MixedRepresentation));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn losses_stay_in_unit_interval(
            sub in proptest::collection::vec(0u8..2, 0..8),
            others in proptest::collection::vec(0u8..2, 2..24),
            seed in 0u64..1000,
        ) {
            let to_items = |bits: &[u8]| -> Vec<Item> {
                bits.iter().map(|&b| Item::Scalar(b as f64)).collect()
            };
            let submissions = SubmissionSet::from_datasets(vec![
                to_items(&sub),
                to_items(&others),
            ]).unwrap();

            let mut rng = substream(seed, &[0]);
            let r2 = loss_alg2(&bb22(), &FeatureBank::identity(), &submissions, 0, &mut rng).unwrap();
            prop_assert!((0.0..=1.0).contains(&r2.tau));

            if !sub.is_empty() {
                let mut rng = substream(seed, &[1]);
                let r3 = loss_alg3(
                    &FeatureBank::identity(), &SplitMap::zero(), &submissions, 0, &mut rng,
                ).unwrap();
                prop_assert!((0.0..=1.0).contains(&r3.tau));
                let mean: f64 = r3.per_feature.iter().map(|f| f.tau).sum::<f64>()
                    / r3.per_feature.len() as f64;
                prop_assert!((r3.tau - mean).abs() < 1e-15);
            }
        }
    }
}
