//! Strategic-agent simulation: submission strategies, scenario
//! generation, and the seeded Monte-Carlo engine.

mod engine;
mod generate;
mod strategy;

pub use engine::{
    coupled_size_losses, expected_loss, focal_loss, mib_curve, truthfulness_gap, BaselineKind,
    GapEstimate, LossMethod, MonteCarloEstimate,
};
pub use generate::{
    generate_scenario, DataGenerator, EmbeddingModel, ScalarDistribution, ScenarioLatent,
};
pub use strategy::{apply_strategy, CountRule, Strategy};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{strategy} strategy requires nonempty data")]
    EmptyData { strategy: &'static str },
    #[error("{strategy} strategy requires scalar data")]
    RequiresScalar { strategy: &'static str },
    #[error("{strategy} strategy requires vector data")]
    RequiresVector { strategy: &'static str },
    #[error("fabrication shift has dimension {shift} but data has dimension {data}")]
    ShiftDimensionMismatch { shift: usize, data: usize },
    #[error("invalid generator parameter: {reason}")]
    InvalidGenerator { reason: String },
    #[error("sizes list has {sizes} entries but the generator holds {datasets} fixed datasets")]
    SizesMismatch { sizes: usize, datasets: usize },
    #[error("requested {requested} points but fixed dataset {agent} holds only {available}")]
    FixedDataTooSmall { agent: usize, requested: usize, available: usize },
    #[error("Monte-Carlo estimation needs at least 2 trials, got {trials}")]
    TooFewTrials { trials: u64 },
    #[error("trial {trial} failed: {source}")]
    TrialFailed {
        trial: u64,
        #[source]
        source: Box<SimError>,
    },
    #[error(transparent)]
    Mechanism(#[from] crate::mechanism::MechanismError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
}
