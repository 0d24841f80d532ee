//! The Monte-Carlo engine.
//!
//! Trials are embarrassingly parallel: trial `t` derives every stream it
//! needs from `trial_seed(master, t)`, and aggregation runs in trial
//! order, so estimates are bit-identical whether trials run sequentially
//! or on a thread pool. Paired designs (truthfulness gaps, size curves,
//! finite differences) reuse the trial's scenario and mechanism streams
//! across arms — common random numbers — so differences are estimated at
//! far lower variance than independent runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_scenario, DataGenerator};
use super::strategy::{apply_strategy, Strategy};
use super::SimError;
use crate::features::{FeatureBank, Item};
use crate::mechanism::{agent_loss, MechanismConfig, Submission, SubmissionSet};
use crate::rng::{substream, trial_seed, Lane};
use crate::stats::{cvm_two_sample, ks_statistic, mean_diff};

/// A Monte-Carlo mean with its standard error (sample std / sqrt(trials)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub master_seed: u64,
}

impl MonteCarloEstimate {
    pub fn from_values(values: &[f64], master_seed: u64) -> Result<Self, SimError> {
        if values.len() < 2 {
            return Err(SimError::TooFewTrials { trials: values.len() as u64 });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self { mean, std_error: (var / n).sqrt(), trials: values.len() as u64, master_seed })
    }
}

/// Classic two-sample statistics, used as comparison losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Cvm,
    Ks,
    MeanDiff,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Cvm => "cvm",
            BaselineKind::Ks => "ks",
            BaselineKind::MeanDiff => "mean_diff",
        }
    }
}

/// What scores an agent: a mechanism, or a baseline statistic applied to
/// the same features and averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LossMethod {
    Mechanism { config: MechanismConfig },
    Baseline { kind: BaselineKind, bank: FeatureBank },
}

impl LossMethod {
    pub fn name(&self) -> String {
        match self {
            LossMethod::Mechanism { config } => match config.mode {
                crate::mechanism::MechanismMode::Alg1 => "alg1".to_string(),
                crate::mechanism::MechanismMode::Alg2 => "alg2".to_string(),
                crate::mechanism::MechanismMode::Alg3 => "alg3".to_string(),
            },
            LossMethod::Baseline { kind, .. } => kind.name().to_string(),
        }
    }
}

/// Score one agent under the given method. Baselines compare the agent's
/// submission against the pooled others per feature and average; they
/// consume no randomness.
pub fn focal_loss<R: rand::Rng>(
    method: &LossMethod,
    submissions: &SubmissionSet,
    agent_index: usize,
    rng: &mut R,
) -> Result<f64, SimError> {
    match method {
        LossMethod::Mechanism { config } => {
            Ok(agent_loss(config, submissions, agent_index, rng)?.tau)
        }
        LossMethod::Baseline { kind, bank } => {
            let agent = submissions.agent(agent_index)?;
            let pooled = submissions.pooled_others(agent_index)?;
            let mut total = 0.0;
            for k in 0..bank.len() {
                let own = bank.featurize_dataset(k, &agent.items)?;
                let others = bank.featurize_dataset(k, &pooled)?;
                total += match kind {
                    BaselineKind::Cvm => cvm_two_sample(&own, &others)?,
                    BaselineKind::Ks => ks_statistic(&own, &others)?,
                    BaselineKind::MeanDiff => mean_diff(&own, &others)?,
                };
            }
            Ok(total / bank.len() as f64)
        }
    }
}

fn build_submissions(
    datasets: &[Vec<Item>],
    strategies: &[Strategy],
    trial: u64,
) -> Result<SubmissionSet, SimError> {
    let submissions = datasets
        .iter()
        .zip(strategies)
        .enumerate()
        .map(|(agent, (data, strategy))| {
            let mut rng = substream(trial, &[Lane::Strategy as u64, agent as u64]);
            Ok(Submission { agent_id: agent as u64, items: apply_strategy(strategy, data, &mut rng)? })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SubmissionSet::new(submissions)?)
}

fn run_trials<T, F>(trials: u64, master_seed: u64, body: F) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T, SimError> + Sync,
{
    if trials < 2 {
        return Err(SimError::TooFewTrials { trials });
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            body(t, trial_seed(master_seed, t)).map_err(|source| SimError::TrialFailed {
                trial: t,
                source: Box::new(source),
            })
        })
        .collect()
}

/// Estimate the focal agent's expected loss: a fresh scenario and
/// mechanism run per trial.
pub fn expected_loss(
    generator: &DataGenerator,
    sizes: &[usize],
    strategies: &[Strategy],
    method: &LossMethod,
    focal: usize,
    trials: u64,
    master_seed: u64,
) -> Result<MonteCarloEstimate, SimError> {
    let values = run_trials(trials, master_seed, |_, ts| {
        let mut scenario_rng = substream(ts, &[Lane::Scenario as u64]);
        let (_, datasets) = generate_scenario(generator, sizes, &mut scenario_rng)?;
        let submissions = build_submissions(&datasets, strategies, ts)?;
        let mut mech_rng = crate::rng::agent_stream(ts, focal as u64);
        focal_loss(method, &submissions, focal, &mut mech_rng)
    })?;
    MonteCarloEstimate::from_values(&values, master_seed)
}

/// A paired fabrication-versus-truthful comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// Mean of (fabricated loss - truthful loss); positive evidences
    /// truthfulness.
    pub gap: f64,
    /// Standard error of the paired differences.
    pub combined_se: f64,
    pub truthful: MonteCarloEstimate,
    pub fabricated: MonteCarloEstimate,
}

/// Estimate E[loss | fabrication] - E[loss | truthful] for the focal
/// agent with everyone else truthful, sharing scenario and mechanism
/// randomness across the two arms.
pub fn truthfulness_gap(
    generator: &DataGenerator,
    sizes: &[usize],
    fabrication: &Strategy,
    method: &LossMethod,
    focal: usize,
    trials: u64,
    master_seed: u64,
) -> Result<GapEstimate, SimError> {
    let truthful: Vec<Strategy> = vec![Strategy::Truthful; sizes.len()];
    let mut fabricated = truthful.clone();
    fabricated[focal] = fabrication.clone();

    let pairs = run_trials(trials, master_seed, |_, ts| {
        let mut scenario_rng = substream(ts, &[Lane::Scenario as u64]);
        let (_, datasets) = generate_scenario(generator, sizes, &mut scenario_rng)?;

        let truthful_set = build_submissions(&datasets, &truthful, ts)?;
        let mut rng = crate::rng::agent_stream(ts, focal as u64);
        let loss_truthful = focal_loss(method, &truthful_set, focal, &mut rng)?;

        let fabricated_set = build_submissions(&datasets, &fabricated, ts)?;
        let mut rng = crate::rng::agent_stream(ts, focal as u64);
        let loss_fabricated = focal_loss(method, &fabricated_set, focal, &mut rng)?;

        Ok((loss_truthful, loss_fabricated))
    })?;

    let truthful_values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let fabricated_values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diffs: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let diff_est = MonteCarloEstimate::from_values(&diffs, master_seed)?;
    Ok(GapEstimate {
        gap: diff_est.mean,
        combined_se: diff_est.std_error,
        truthful: MonteCarloEstimate::from_values(&truthful_values, master_seed)?,
        fabricated: MonteCarloEstimate::from_values(&fabricated_values, master_seed)?,
    })
}

/// Per-trial truthful losses for the focal agent at several dataset
/// sizes, sharing randomness across sizes: the focal data is drawn once
/// per trial at the largest size and prefix-truncated for smaller ones,
/// and the scenario and mechanism streams are reused. Row `t` holds the
/// losses of trial `t` in `focal_sizes` order.
pub fn coupled_size_losses(
    generator: &DataGenerator,
    base_sizes: &[usize],
    focal: usize,
    focal_sizes: &[usize],
    method: &LossMethod,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>, SimError> {
    let max_size = *focal_sizes.iter().max().expect("nonempty focal sizes");
    let mut draw_sizes = base_sizes.to_vec();
    draw_sizes[focal] = max_size;
    let truthful: Vec<Strategy> = vec![Strategy::Truthful; base_sizes.len()];

    run_trials(trials, master_seed, |_, ts| {
        let mut scenario_rng = substream(ts, &[Lane::Scenario as u64]);
        let (_, datasets) = generate_scenario(generator, &draw_sizes, &mut scenario_rng)?;
        let mut row = Vec::with_capacity(focal_sizes.len());
        for &n in focal_sizes {
            let mut truncated = datasets.clone();
            truncated[focal].truncate(n);
            let submissions = build_submissions(&truncated, &truthful, ts)?;
            let mut rng = crate::rng::agent_stream(ts, focal as u64);
            row.push(focal_loss(method, &submissions, focal, &mut rng)?);
        }
        Ok(row)
    })
}

/// Expected truthful loss as the focal agent's dataset grows, with the
/// sizes sharing randomness through [`coupled_size_losses`].
pub fn mib_curve(
    generator: &DataGenerator,
    base_sizes: &[usize],
    focal: usize,
    focal_sizes: &[usize],
    method: &LossMethod,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<(usize, MonteCarloEstimate)>, SimError> {
    if focal_sizes.is_empty() {
        return Ok(Vec::new());
    }
    let rows =
        coupled_size_losses(generator, base_sizes, focal, focal_sizes, method, trials, master_seed)?;
    focal_sizes
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let column: Vec<f64> = rows.iter().map(|row| row[j]).collect();
            Ok((n, MonteCarloEstimate::from_values(&column, master_seed)?))
        })
        .collect()
}
