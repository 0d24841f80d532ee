//! Submission strategies: the truthful identity and the fabrication
//! behaviors used to stress the mechanisms. Every strategy is a pure
//! function of the input dataset and its own random stream.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::features::Item;

/// How many points a fabrication appends. The default matches the
/// experiments: fabricate as many points as the original dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountRule {
    Fraction { value: f64 },
    Absolute { value: usize },
}

impl Default for CountRule {
    fn default() -> Self {
        CountRule::Fraction { value: 1.0 }
    }
}

impl CountRule {
    pub fn count(&self, data_len: usize) -> usize {
        match self {
            CountRule::Fraction { value } => (value * data_len as f64).round() as usize,
            CountRule::Absolute { value } => *value,
        }
    }
}

/// A submission function: dataset in, dataset out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Submit the dataset unchanged.
    Truthful,
    /// Append Bernoulli(1/2) draws.
    BernHalfAugment {
        #[serde(default)]
        count: CountRule,
    },
    /// Estimate the rate from the data, then append Bernoulli(estimate) draws.
    BernPluginAugment {
        #[serde(default)]
        count: CountRule,
    },
    /// Sort ascending and insert the midpoint of every adjacent pair.
    MidpointInsert,
    /// Append uniform resamples (with replacement) of the data.
    DuplicateAugment {
        #[serde(default)]
        count: CountRule,
    },
    /// Add a constant offset to every scalar point.
    ShiftAll { delta: f64 },
    /// Append embedding vectors from a normal fabricator centered on the
    /// data's empirical mean plus `shift`, with per-coordinate standard
    /// deviation scaled by `scale`.
    EmbeddingFabricate {
        shift: Vec<f64>,
        scale: f64,
        #[serde(default)]
        count: CountRule,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Truthful => "truthful",
            Strategy::BernHalfAugment { .. } => "bern_half",
            Strategy::BernPluginAugment { .. } => "bern_plugin",
            Strategy::MidpointInsert => "midpoint_insert",
            Strategy::DuplicateAugment { .. } => "duplicate",
            Strategy::ShiftAll { .. } => "shift_all",
            Strategy::EmbeddingFabricate { .. } => "embedding_fabricate",
        }
    }

    pub fn is_truthful(&self) -> bool {
        matches!(self, Strategy::Truthful)
    }
}

fn scalars(data: &[Item], strategy: &'static str) -> Result<Vec<f64>, SimError> {
    data.iter()
        .map(|item| item.as_scalar().ok_or(SimError::RequiresScalar { strategy }))
        .collect()
}

fn append_bernoulli<R: Rng>(data: &[Item], p: f64, k: usize, rng: &mut R) -> Vec<Item> {
    let mut out = data.to_vec();
    out.extend((0..k).map(|_| Item::Scalar(if rng.random::<f64>() < p { 1.0 } else { 0.0 })));
    out
}

/// Apply a strategy to a dataset using the given stream.
pub fn apply_strategy<R: Rng>(
    strategy: &Strategy,
    data: &[Item],
    rng: &mut R,
) -> Result<Vec<Item>, SimError> {
    match strategy {
        Strategy::Truthful => Ok(data.to_vec()),

        Strategy::BernHalfAugment { count } => {
            Ok(append_bernoulli(data, 0.5, count.count(data.len()), rng))
        }

        Strategy::BernPluginAugment { count } => {
            if data.is_empty() {
                return Err(SimError::EmptyData { strategy: "bern_plugin" });
            }
            let values = scalars(data, "bern_plugin")?;
            let estimate = values.iter().sum::<f64>() / values.len() as f64;
            Ok(append_bernoulli(data, estimate, count.count(data.len()), rng))
        }

        Strategy::MidpointInsert => {
            if data.is_empty() {
                return Err(SimError::EmptyData { strategy: "midpoint_insert" });
            }
            let mut values = scalars(data, "midpoint_insert")?;
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
            if values.len() == 1 {
                return Ok(data.to_vec());
            }
            let mut out = Vec::with_capacity(2 * values.len() - 1);
            for pair in values.windows(2) {
                out.push(pair[0]);
                out.push(0.5 * (pair[0] + pair[1]));
            }
            out.push(*values.last().expect("nonempty"));
            Ok(out.into_iter().map(Item::Scalar).collect())
        }

        Strategy::DuplicateAugment { count } => {
            let k = count.count(data.len());
            if data.is_empty() && k > 0 {
                return Err(SimError::EmptyData { strategy: "duplicate" });
            }
            let mut out = data.to_vec();
            out.extend((0..k).map(|_| data[rng.random_range(0..data.len())].clone()));
            Ok(out)
        }

        Strategy::ShiftAll { delta } => {
            let values = scalars(data, "shift_all")?;
            Ok(values.into_iter().map(|v| Item::Scalar(v + delta)).collect())
        }

        Strategy::EmbeddingFabricate { shift, scale, count } => {
            if data.is_empty() {
                return Err(SimError::EmptyData { strategy: "embedding_fabricate" });
            }
            let dim = data[0]
                .dimension()
                .ok_or(SimError::RequiresVector { strategy: "embedding_fabricate" })?;
            if shift.len() != dim {
                return Err(SimError::ShiftDimensionMismatch { shift: shift.len(), data: dim });
            }
            // Per-coordinate empirical mean and standard deviation track
            // whatever distribution the agent's real data follows.
            let n = data.len() as f64;
            let mut mean = vec![0.0; dim];
            for item in data {
                match item {
                    Item::Vector(v) if v.len() == dim => {
                        for (m, x) in mean.iter_mut().zip(v) {
                            *m += x;
                        }
                    }
                    _ => return Err(SimError::RequiresVector { strategy: "embedding_fabricate" }),
                }
            }
            for m in &mut mean {
                *m /= n;
            }
            let mut var = vec![0.0; dim];
            if data.len() > 1 {
                for item in data {
                    if let Item::Vector(v) = item {
                        for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                            *s += (x - m) * (x - m);
                        }
                    }
                }
                for s in &mut var {
                    *s /= n - 1.0;
                }
            }
            let k = count.count(data.len());
            let normal = rand_distr::StandardNormal;
            let mut out = data.to_vec();
            for _ in 0..k {
                let coords: Vec<f64> = (0..dim)
                    .map(|j| {
                        let z: f64 = normal.sample(rng);
                        mean[j] + shift[j] + scale * var[j].sqrt() * z
                    })
                    .collect();
                out.push(Item::Vector(coords));
            }
            Ok(out)
        }
    }
}
