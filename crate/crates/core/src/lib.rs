//! Truthful data-sharing mechanisms built on Cramér–von Mises style
//! two-sample losses.
//!
//! The crate provides:
//!
//! * empirical CDFs and classic two-sample statistics ([`stats`]),
//! * conjugate Bayesian models with closed-form posterior-predictive CDFs
//!   ([`bayes`]),
//! * feature maps that reduce vector-valued data to scalars ([`features`]),
//! * the three loss mechanisms — single-variable Bayesian, feature-based
//!   Bayesian, and prior-agnostic — ([`mechanism`]),
//! * data-sharing applications built on the losses: budgeted purchase,
//!   a collection marketplace, and federated allocation ([`apps`]),
//! * strategic-agent simulation and a seeded Monte-Carlo engine ([`sim`]),
//! * experiment orchestration, config/embedding ingestion, and the
//!   verification suite ([`experiment`], [`config`], [`embeddings`],
//!   [`verify`]).
//!
//! Every randomized computation is keyed by an explicit master seed and
//! derived sub-streams, so any reported number can be reproduced exactly.

pub mod apps;
pub mod bayes;
pub mod config;
pub mod embeddings;
pub mod experiment;
pub mod features;
pub mod mechanism;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod verify;

pub use bayes::{BetaBernoulliModel, NormalNormalModel, PosteriorModel};
pub use features::{FeatureBank, FeatureMap, Item};
pub use mechanism::{LossReport, MechanismConfig, MechanismMode, SplitMap, Submission, SubmissionSet};
pub use sim::{CountRule, DataGenerator, LossMethod, MonteCarloEstimate, Strategy};
pub use stats::{cvm_two_sample, ks_statistic, mean_diff, Ecdf, Sample};
