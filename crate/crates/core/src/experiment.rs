//! Experiment orchestration and report emission.
//!
//! A run produces a machine-readable `results.json` (config echo plus
//! every estimate with its standard error and seed) and, for loss grids,
//! a `summary.csv` table of truthful versus untruthful losses and a
//! `normalized.csv` with truthful means scaled to one per method.
//! Reruns with the same config and seed reproduce the files byte for
//! byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apps::{
    federated_allocate, federated_alpha, marketplace_alpha, marketplace_round, AppError,
    FederatedConfig, MarketAlpha, MarketplaceConfig,
};
use crate::config::{ExperimentKind, RunConfig};
use crate::embeddings::EmbeddingTable;
use crate::mechanism::{run_mechanism, Submission, SubmissionSet};
use crate::rng::{substream, trial_seed, Lane};
use crate::sim::{
    expected_loss, focal_loss, truthfulness_gap, LossMethod, MonteCarloEstimate, SimError,
    Strategy,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    App(#[from] AppError),
    #[error("experiment {experiment} needs {what}")]
    MissingSection { experiment: &'static str, what: &'static str },
    #[error("embedding table has no agents with truthful rows")]
    NoTruthfulAgents,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// One cell of a methods-by-strategies loss grid for the focal agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub method: String,
    pub strategy: String,
    pub estimate: MonteCarloEstimate,
    /// Paired gap against the truthful arm (absent on the truthful row).
    pub gap_vs_truthful: Option<f64>,
    pub gap_se: Option<f64>,
    /// Loss normalized so the method's truthful mean is 1.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketReport {
    pub calibration: MarketAlpha,
    pub payments: Vec<f64>,
    pub buyer_charge: f64,
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedAgentReport {
    pub agent: usize,
    pub expected_truthful_loss: MonteCarloEstimate,
    pub alpha: f64,
    pub tau: f64,
    pub allocation_size: usize,
    pub floored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: RunConfig,
    pub focal_agent: usize,
    pub cells: Vec<GridCell>,
    pub market: Option<MarketReport>,
    pub federated: Option<Vec<FederatedAgentReport>>,
}

/// Run the configured experiment. Embedding-file runs take the ingested
/// table; every other kind ignores it.
pub fn run_experiment(
    cfg: &RunConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<ExperimentReport, ExperimentError> {
    match cfg.experiment {
        ExperimentKind::Synthetic => grid_experiment(cfg, None),
        ExperimentKind::Embedding => grid_experiment(cfg, embeddings),
        ExperimentKind::Marketplace => marketplace_experiment(cfg),
        ExperimentKind::Federated => federated_experiment(cfg),
    }
}

fn grid_experiment(
    cfg: &RunConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<ExperimentReport, ExperimentError> {
    match embeddings {
        None => generated_grid(cfg),
        Some(table) => fixed_grid(cfg, table),
    }
}

/// Grid over generated scenarios: per method, the truthful estimate and
/// one paired gap per fabrication strategy, all sharing scenario streams.
fn generated_grid(cfg: &RunConfig) -> Result<ExperimentReport, ExperimentError> {
    let focal = 0usize;
    let mut cells = Vec::new();
    for method in &cfg.methods {
        let name = method.name();
        let mut truthful: Option<MonteCarloEstimate> = None;
        let mut rows: Vec<(String, MonteCarloEstimate, Option<f64>, Option<f64>)> = Vec::new();
        for strategy in &cfg.strategies {
            if strategy.is_truthful() {
                continue;
            }
            let gap = truthfulness_gap(
                &cfg.generator,
                &cfg.agent_sizes,
                strategy,
                method,
                focal,
                cfg.trials,
                cfg.seed,
            )?;
            truthful.get_or_insert(gap.truthful);
            rows.push((
                strategy.name().to_string(),
                gap.fabricated,
                Some(gap.gap),
                Some(gap.combined_se),
            ));
        }
        let truthful = match truthful {
            Some(estimate) => estimate,
            None => expected_loss(
                &cfg.generator,
                &cfg.agent_sizes,
                &vec![Strategy::Truthful; cfg.agent_sizes.len()],
                method,
                focal,
                cfg.trials,
                cfg.seed,
            )?,
        };
        let scale = truthful.mean;
        cells.push(GridCell {
            method: name.clone(),
            strategy: "truthful".to_string(),
            estimate: truthful,
            gap_vs_truthful: None,
            gap_se: None,
            normalized: 1.0,
        });
        for (strategy, estimate, gap, gap_se) in rows {
            cells.push(GridCell {
                method: name.clone(),
                strategy,
                estimate,
                gap_vs_truthful: gap,
                gap_se,
                normalized: if scale > 0.0 { estimate.mean / scale } else { f64::NAN },
            });
        }
    }
    Ok(ExperimentReport { config: cfg.clone(), focal_agent: 0, cells, market: None, federated: None })
}

/// Grid over a fixed embedding table: the data never changes, only the
/// per-trial mechanism randomness. The untruthful arm appends the focal
/// agent's fabricated rows to its truthful rows.
fn fixed_grid(cfg: &RunConfig, table: &EmbeddingTable) -> Result<ExperimentReport, ExperimentError> {
    let truthful_rows = table.truthful_by_agent();
    if truthful_rows.is_empty() {
        return Err(ExperimentError::NoTruthfulAgents);
    }
    let fabricated_rows = table.fabricated_by_agent();
    // Focal agent: the lowest id that has fabricated rows, else the lowest id.
    let focal_id = fabricated_rows
        .keys()
        .copied()
        .find(|id| truthful_rows.contains_key(id))
        .unwrap_or_else(|| *truthful_rows.keys().next().expect("nonempty"));

    let build_set = |untruthful: bool| -> Result<SubmissionSet, ExperimentError> {
        let submissions = truthful_rows
            .iter()
            .map(|(&agent_id, items)| {
                let mut items = items.clone();
                if untruthful && agent_id == focal_id {
                    items.extend(fabricated_rows.get(&agent_id).cloned().unwrap_or_default());
                }
                Submission { agent_id, items }
            })
            .collect();
        Ok(SubmissionSet::new(submissions).map_err(SimError::from)?)
    };
    let truthful_set = build_set(false)?;
    let untruthful_set = build_set(true)?;
    let focal_index = truthful_set
        .agents()
        .iter()
        .position(|s| s.agent_id == focal_id)
        .expect("focal id from the table");
    let has_fabrication = fabricated_rows.contains_key(&focal_id);

    let mut cells = Vec::new();
    for method in &cfg.methods {
        let name = method.name();
        let arm = |set: &SubmissionSet| -> Result<MonteCarloEstimate, ExperimentError> {
            let values = (0..cfg.trials)
                .map(|t| {
                    let ts = trial_seed(cfg.seed, t);
                    let mut rng = crate::rng::agent_stream(ts, focal_id);
                    focal_loss(method, set, focal_index, &mut rng)
                })
                .collect::<Result<Vec<f64>, SimError>>()?;
            Ok(MonteCarloEstimate::from_values(&values, cfg.seed)?)
        };
        let truthful = arm(&truthful_set)?;
        cells.push(GridCell {
            method: name.clone(),
            strategy: "truthful".to_string(),
            estimate: truthful,
            gap_vs_truthful: None,
            gap_se: None,
            normalized: 1.0,
        });
        if has_fabrication {
            let untruthful = arm(&untruthful_set)?;
            let scale = truthful.mean;
            cells.push(GridCell {
                method: name.clone(),
                strategy: "file_fabricated".to_string(),
                estimate: untruthful,
                gap_vs_truthful: Some(untruthful.mean - truthful.mean),
                gap_se: Some((untruthful.std_error.powi(2) + truthful.std_error.powi(2)).sqrt()),
                normalized: if scale > 0.0 { untruthful.mean / scale } else { f64::NAN },
            });
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        focal_agent: focal_index,
        cells,
        market: None,
        federated: None,
    })
}

fn marketplace_experiment(cfg: &RunConfig) -> Result<ExperimentReport, ExperimentError> {
    let section = cfg
        .market
        .as_ref()
        .ok_or(ExperimentError::MissingSection { experiment: "marketplace", what: "market.*" })?;
    let market_cfg = MarketplaceConfig {
        cost: section.cost,
        valuation: section.valuation.clone(),
        agents: cfg.agent_count,
        n_max: section.n_max,
        generator: cfg.generator.clone(),
        method: LossMethod::Mechanism { config: cfg.mechanism_config() },
        trials: cfg.trials,
    };
    let calibration = marketplace_alpha(&market_cfg, cfg.seed)?;

    // One demonstration round at the recommended profile.
    let mut rng = substream(cfg.seed, &[Lane::App as u64]);
    let (_, datasets) =
        crate::sim::generate_scenario(&cfg.generator, &calibration.profile, &mut rng)?;
    let set = SubmissionSet::from_datasets(datasets).map_err(SimError::from)?;
    let reports = run_mechanism(&cfg.mechanism_config(), &set, cfg.seed).map_err(SimError::from)?;
    let (payments, buyer_charge) = marketplace_round(&market_cfg, &calibration, &reports)?;

    Ok(ExperimentReport {
        config: cfg.clone(),
        focal_agent: 0,
        cells: Vec::new(),
        market: Some(MarketReport {
            calibration,
            payments,
            buyer_charge,
            taus: reports.iter().map(|r| r.tau).collect(),
        }),
        federated: None,
    })
}

fn federated_experiment(cfg: &RunConfig) -> Result<ExperimentReport, ExperimentError> {
    let section = cfg
        .federated
        .as_ref()
        .ok_or(ExperimentError::MissingSection { experiment: "federated", what: "federated.*" })?;
    let fed_cfg = FederatedConfig {
        valuations: vec![section.valuation.clone(); cfg.agent_count],
        estimation_trials: section.estimation_trials,
    };
    let method = LossMethod::Mechanism { config: cfg.mechanism_config() };

    // One shared scenario and mechanism run for the allocation demo.
    let mut rng = substream(cfg.seed, &[Lane::App as u64]);
    let (_, datasets) =
        crate::sim::generate_scenario(&cfg.generator, &cfg.agent_sizes, &mut rng)?;
    let set = SubmissionSet::from_datasets(datasets).map_err(SimError::from)?;
    let reports = run_mechanism(&cfg.mechanism_config(), &set, cfg.seed).map_err(SimError::from)?;

    let mut agent_reports = Vec::with_capacity(cfg.agent_count);
    for (agent, report) in reports.iter().enumerate() {
        let estimate = expected_loss(
            &cfg.generator,
            &cfg.agent_sizes,
            &vec![Strategy::Truthful; cfg.agent_count],
            &method,
            agent,
            section.estimation_trials,
            cfg.seed,
        )?;
        let alpha = federated_alpha(&fed_cfg, agent, &cfg.agent_sizes, &estimate)?;
        let mut alloc_rng = substream(cfg.seed, &[Lane::App as u64, 1 + agent as u64]);
        let allocation =
            federated_allocate(&fed_cfg, agent, alpha, &set, report, &mut alloc_rng)?;
        agent_reports.push(FederatedAgentReport {
            agent,
            expected_truthful_loss: estimate,
            alpha,
            tau: report.tau,
            allocation_size: allocation.size,
            floored: allocation.floored,
        });
    }

    Ok(ExperimentReport {
        config: cfg.clone(),
        focal_agent: 0,
        cells: Vec::new(),
        market: None,
        federated: Some(agent_reports),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, contents)
        .map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })
}

/// Write `results.json` and, for grid runs, `summary.csv` and
/// `normalized.csv`. Returns the written paths.
pub fn write_reports(
    report: &ExperimentReport,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| ExperimentError::Io { path: out_dir.to_path_buf(), source })?;
    let mut written = Vec::new();

    let results = out_dir.join("results.json");
    write_file(&results, &serde_json::to_string_pretty(report)?)?;
    written.push(results);

    if !report.cells.is_empty() {
        // method,scenario,truthful mean,truthful se,untruthful mean,untruthful se
        let mut truthful: BTreeMap<&str, &GridCell> = BTreeMap::new();
        for cell in &report.cells {
            if cell.strategy == "truthful" {
                truthful.insert(cell.method.as_str(), cell);
            }
        }
        let mut summary =
            String::from("method,scenario,truthful_mean,truthful_se,untruthful_mean,untruthful_se\n");
        let mut normalized = String::from("method,strategy,normalized_loss,normalized_se\n");
        for cell in &report.cells {
            let t = truthful.get(cell.method.as_str()).expect("truthful row per method");
            let scale = t.estimate.mean;
            let norm_se =
                if scale > 0.0 { cell.estimate.std_error / scale } else { f64::NAN };
            normalized.push_str(&format!(
                "{},{},{},{}\n",
                cell.method, cell.strategy, cell.normalized, norm_se
            ));
            if cell.strategy == "truthful" {
                continue;
            }
            summary.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.method,
                cell.strategy,
                t.estimate.mean,
                t.estimate.std_error,
                cell.estimate.mean,
                cell.estimate.std_error,
            ));
        }
        let summary_path = out_dir.join("summary.csv");
        write_file(&summary_path, &summary)?;
        written.push(summary_path);
        let normalized_path = out_dir.join("normalized.csv");
        write_file(&normalized_path, &normalized)?;
        written.push(normalized_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const GRID: &str = "\
experiment = synthetic
mechanism = alg1
seed = 9
trials = 300
agents.count = 4
agents.sizes = 12
generator.kind = bayesian
model.kind = beta_bernoulli
model.alpha = 2.0
model.beta = 2.0
methods = alg1,cvm,ks,mean_diff
strategies = truthful,bern_half,bern_plugin
";

    #[test]
    fn grid_has_methods_by_strategies_shape() {
        let cfg = parse_config(GRID).unwrap();
        let report = run_experiment(&cfg, None).unwrap();
        // 4 methods x (1 truthful + 2 fabrications).
        assert_eq!(report.cells.len(), 12);
        for method in ["alg1", "cvm", "ks", "mean_diff"] {
            let rows: Vec<_> = report.cells.iter().filter(|c| c.method == method).collect();
            assert_eq!(rows.len(), 3);
            assert_eq!(rows[0].strategy, "truthful");
            assert_eq!(rows[0].normalized, 1.0);
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = parse_config(GRID).unwrap();
        let a = serde_json::to_string(&run_experiment(&cfg, None).unwrap()).unwrap();
        let b = serde_json::to_string(&run_experiment(&cfg, None).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reports_are_written_and_reproducible() {
        let cfg = parse_config(GRID).unwrap();
        let report = run_experiment(&cfg, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = write_reports(&report, dir.path()).unwrap();
        assert_eq!(written.len(), 3);
        let first = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("method,scenario,"));
        assert_eq!(summary.lines().count(), 9); // header + 4 methods x 2 fabrications

        write_reports(&report, dir.path()).unwrap();
        let second = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn synthetic_embedding_grid_runs() {
        let cfg = parse_config(
            "\
experiment = embedding
mechanism = alg3
seed = 17
trials = 80
agents.count = 3
agents.sizes = 20
generator.kind = embedding
generator.dim = 4
generator.latent_scale = 0.5
features = coordinates:4
methods = alg3,cvm,ks,mean_diff
strategies = truthful,embedding_fabricate
strategy.embed_shift = 0.5
strategy.embed_shift_coords = 2
",
        )
        .unwrap();
        let report = run_experiment(&cfg, None).unwrap();
        // 4 methods x (truthful + embedding_fabricate): Table-2 shape.
        assert_eq!(report.cells.len(), 8);
        let dir = tempfile::tempdir().unwrap();
        write_reports(&report, dir.path()).unwrap();
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 5);
        assert!(summary.contains("embedding_fabricate"));
        let normalized = std::fs::read_to_string(dir.path().join("normalized.csv")).unwrap();
        assert!(normalized.starts_with("method,strategy,normalized_loss,normalized_se\n"));
    }

    #[test]
    fn fixed_embedding_grid_runs() {
        let cfg = parse_config(
            "\
experiment = embedding
mechanism = alg3
seed = 3
trials = 64
agents.count = 2
agents.sizes = 6
generator.kind = embedding
generator.dim = 3
features = coordinates:3
methods = alg3,ks
",
        )
        .unwrap();
        let mut text = String::from("agent,label,e0,e1,e2\n");
        let mut rng = crate::rng::substream(5, &[0]);
        use rand::Rng;
        for agent in 0..2 {
            for _ in 0..6 {
                text.push_str(&format!(
                    "{agent},truthful,{},{},{}\n",
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>()
                ));
            }
        }
        for _ in 0..4 {
            text.push_str(&format!(
                "0,fabricated,{},{},{}\n",
                1.0 + rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>()
            ));
        }
        let table = crate::embeddings::parse_embeddings(&text).unwrap();
        let report = run_experiment(&cfg, Some(&table)).unwrap();
        assert_eq!(report.cells.len(), 4); // 2 methods x (truthful, file_fabricated)
        assert!(report.cells.iter().any(|c| c.strategy == "file_fabricated"));
    }
}
