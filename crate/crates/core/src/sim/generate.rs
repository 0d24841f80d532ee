//! Scenario generation: how agents' true datasets come to exist.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::bayes::PosteriorModel;
use crate::features::Item;

/// Fixed scalar distributions for the frequentist setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarDistribution {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, var: f64 },
    Bernoulli { p: f64 },
    PointMass { at: f64 },
}

impl ScalarDistribution {
    pub fn validate(&self) -> Result<(), SimError> {
        let reason = match self {
            ScalarDistribution::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                Some(format!("uniform needs low < high, got [{low}, {high})"))
            }
            ScalarDistribution::Normal { var, .. } if !var.is_finite() || *var <= 0.0 => {
                Some(format!("normal needs var > 0, got {var}"))
            }
            ScalarDistribution::Bernoulli { p } if !(0.0..=1.0).contains(p) => {
                Some(format!("bernoulli needs p in [0,1], got {p}"))
            }
            _ => None,
        };
        match reason {
            Some(reason) => Err(SimError::InvalidGenerator { reason }),
            None => Ok(()),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDistribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            ScalarDistribution::Normal { mean, var } => {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                mean + var.sqrt() * z
            }
            ScalarDistribution::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarDistribution::PointMass { at } => *at,
        }
    }
}

/// Synthetic embedding generator: per scenario, a latent mean offset is
/// drawn once and shared by all agents; items are then independent
/// normals around it with a diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub dim: usize,
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
    /// Standard deviation of the shared latent offset; 0 gives a fixed
    /// (frequentist) embedding distribution.
    pub latent_scale: f64,
}

impl EmbeddingModel {
    pub fn isotropic(dim: usize, latent_scale: f64) -> Self {
        Self { dim, mean: vec![0.0; dim], cov_diag: vec![1.0; dim], latent_scale }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.dim == 0 || self.mean.len() != self.dim || self.cov_diag.len() != self.dim {
            return Err(SimError::InvalidGenerator {
                reason: format!(
                    "embedding model dimension mismatch: dim={}, mean={}, cov={}",
                    self.dim,
                    self.mean.len(),
                    self.cov_diag.len()
                ),
            });
        }
        if self.cov_diag.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(SimError::InvalidGenerator {
                reason: "embedding covariance entries must be > 0".to_string(),
            });
        }
        if !self.latent_scale.is_finite() || self.latent_scale < 0.0 {
            return Err(SimError::InvalidGenerator {
                reason: format!("latent_scale must be >= 0, got {}", self.latent_scale),
            });
        }
        Ok(())
    }
}

/// Where agents' true data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataGenerator {
    /// One latent draw from the prior per scenario, then i.i.d. data.
    Bayesian { model: PosteriorModel },
    /// A fixed scalar distribution.
    Frequentist { dist: ScalarDistribution },
    /// Synthetic embeddings.
    Embedding { model: EmbeddingModel },
    /// Fixed per-agent datasets (ingested embeddings); trials reuse them.
    Fixed { datasets: Vec<Vec<Item>> },
}

/// What was latent in a generated scenario, kept for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioLatent {
    None,
    Scalar { value: f64 },
    Vector { offset: Vec<f64> },
}

impl DataGenerator {
    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            DataGenerator::Frequentist { dist } => dist.validate(),
            DataGenerator::Embedding { model } => model.validate(),
            _ => Ok(()),
        }
    }

    /// True data is binary {0,1}.
    pub fn is_binary(&self) -> bool {
        match self {
            DataGenerator::Bayesian { model } => model.is_binary(),
            DataGenerator::Frequentist { dist } => {
                matches!(dist, ScalarDistribution::Bernoulli { .. })
            }
            _ => false,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, DataGenerator::Bayesian { .. } | DataGenerator::Frequentist { .. })
    }
}

/// Generate one scenario: the latent description and per-agent datasets
/// with the requested sizes. Deterministic given the stream.
pub fn generate_scenario<R: Rng>(
    generator: &DataGenerator,
    sizes: &[usize],
    rng: &mut R,
) -> Result<(ScenarioLatent, Vec<Vec<Item>>), SimError> {
    generator.validate()?;
    match generator {
        DataGenerator::Bayesian { model } => {
            let latent = model.draw_latent(rng);
            let datasets = sizes
                .iter()
                .map(|&n| {
                    model.draw_data(latent, n, rng).iter().map(Item::Scalar).collect()
                })
                .collect();
            Ok((ScenarioLatent::Scalar { value: latent }, datasets))
        }
        DataGenerator::Frequentist { dist } => {
            let datasets = sizes
                .iter()
                .map(|&n| (0..n).map(|_| Item::Scalar(dist.draw(rng))).collect())
                .collect();
            Ok((ScenarioLatent::None, datasets))
        }
        DataGenerator::Embedding { model } => {
            let offset: Vec<f64> = (0..model.dim)
                .map(|_| {
                    let z: f64 = rand_distr::StandardNormal.sample(rng);
                    model.latent_scale * z
                })
                .collect();
            let datasets = sizes
                .iter()
                .map(|&n| {
                    (0..n)
                        .map(|_| {
                            let coords: Vec<f64> = (0..model.dim)
                                .map(|j| {
                                    let z: f64 = rand_distr::StandardNormal.sample(rng);
                                    model.mean[j] + offset[j] + model.cov_diag[j].sqrt() * z
                                })
                                .collect();
                            Item::Vector(coords)
                        })
                        .collect()
                })
                .collect();
            Ok((ScenarioLatent::Vector { offset }, datasets))
        }
        DataGenerator::Fixed { datasets } => {
            if sizes.len() != datasets.len() {
                return Err(SimError::SizesMismatch {
                    sizes: sizes.len(),
                    datasets: datasets.len(),
                });
            }
            let out = sizes
                .iter()
                .zip(datasets)
                .enumerate()
                .map(|(agent, (&n, data))| {
                    if n > data.len() {
                        Err(SimError::FixedDataTooSmall {
                            agent,
                            requested: n,
                            available: data.len(),
                        })
                    } else {
                        Ok(data[..n].to_vec())
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((ScenarioLatent::None, out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::BetaBernoulliModel;
    use crate::rng::substream;

    #[test]
    fn zero_sizes_give_empty_datasets() {
        let gen = DataGenerator::Frequentist {
            dist: ScalarDistribution::Uniform { low: 0.0, high: 1.0 },
        };
        let mut rng = substream(0, &[0]);
        let (_, datasets) = generate_scenario(&gen, &[0, 0, 0], &mut rng).unwrap();
        assert!(datasets.iter().all(Vec::is_empty));
    }

    #[test]
    fn bayesian_agents_share_one_latent() {
        let gen = DataGenerator::Bayesian {
            model: PosteriorModel::BetaBernoulli(BetaBernoulliModel::new(2.0, 2.0).unwrap()),
        };
        let mut rng = substream(1, &[0]);
        let (latent, datasets) = generate_scenario(&gen, &[4000, 4000, 4000], &mut rng).unwrap();
        let ScenarioLatent::Scalar { value: p } = latent else {
            panic!("expected scalar latent")
        };
        // Every agent's empirical rate hugs the same latent p.
        for data in &datasets {
            let mean: f64 =
                data.iter().map(|i| i.as_scalar().unwrap()).sum::<f64>() / data.len() as f64;
            let se = (p * (1.0 - p) / data.len() as f64).sqrt();
            assert!((mean - p).abs() < 5.0 * se, "agent mean {mean} vs latent {p}");
        }
    }

    #[test]
    fn uniform_sample_mean_matches_clt() {
        let gen = DataGenerator::Frequentist {
            dist: ScalarDistribution::Uniform { low: 0.0, high: 1.0 },
        };
        let mut rng = substream(2, &[0]);
        let (_, datasets) = generate_scenario(&gen, &[1_000_000], &mut rng).unwrap();
        let mean: f64 = datasets[0].iter().map(|i| i.as_scalar().unwrap()).sum::<f64>()
            / datasets[0].len() as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn generator_validation() {
        assert!(ScalarDistribution::Uniform { low: 1.0, high: 1.0 }.validate().is_err());
        assert!(ScalarDistribution::Normal { mean: 0.0, var: 0.0 }.validate().is_err());
        assert!(ScalarDistribution::Bernoulli { p: 1.5 }.validate().is_err());
        assert!(EmbeddingModel { dim: 2, mean: vec![0.0], cov_diag: vec![1.0, 1.0], latent_scale: 0.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn fixed_generator_truncates_and_validates() {
        let datasets = vec![
            vec![Item::Scalar(1.0), Item::Scalar(2.0)],
            vec![Item::Scalar(3.0)],
        ];
        let gen = DataGenerator::Fixed { datasets };
        let mut rng = substream(3, &[0]);
        let (_, out) = generate_scenario(&gen, &[1, 1], &mut rng).unwrap();
        assert_eq!(out[0], vec![Item::Scalar(1.0)]);
        assert!(matches!(
            generate_scenario(&gen, &[3, 1], &mut rng),
            Err(SimError::FixedDataTooSmall { agent: 0, requested: 3, available: 2 })
        ));
        assert!(matches!(
            generate_scenario(&gen, &[1], &mut rng),
            Err(SimError::SizesMismatch { .. })
        ));
    }

    #[test]
    fn scenarios_are_deterministic() {
        let gen = DataGenerator::Embedding { model: EmbeddingModel::isotropic(4, 0.5) };
        let mut a = substream(4, &[0]);
        let mut b = substream(4, &[0]);
        let (la, da) = generate_scenario(&gen, &[5, 7], &mut a).unwrap();
        let (lb, db) = generate_scenario(&gen, &[5, 7], &mut b).unwrap();
        assert_eq!(la, lb);
        assert_eq!(da, db);
    }
}
