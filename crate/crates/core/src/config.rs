//! Run configuration: a flat `key = value` text format with dotted keys.
//!
//! The parser is hand-rolled on purpose: the format stays diff-friendly,
//! every error names the offending key or line, and unknown keys are
//! rejected rather than ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apps::Valuation;
use crate::bayes::{BetaBernoulliModel, NormalNormalModel, PosteriorModel};
use crate::features::FeatureBank;
use crate::mechanism::{MechanismConfig, MechanismMode, SplitMap};
use crate::sim::{
    BaselineKind, CountRule, DataGenerator, EmbeddingModel, LossMethod, ScalarDistribution,
    Strategy,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("missing mandatory key {key:?}")]
    MissingKey { key: &'static str },
    #[error("unknown key {key:?}")]
    UnknownKey { key: String },
    #[error("key {key:?}: {reason}")]
    Invalid { key: String, reason: String },
}

/// What a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Scalar methods-by-strategies loss grid.
    Synthetic,
    /// Embedding-data loss table (synthetic generator or ingested file).
    Embedding,
    /// Marketplace calibration demo.
    Marketplace,
    /// Federated allocation demo.
    Federated,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Synthetic => "synthetic",
            ExperimentKind::Embedding => "embedding",
            ExperimentKind::Marketplace => "marketplace",
            ExperimentKind::Federated => "federated",
        }
    }
}

/// Marketplace-specific settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSection {
    pub cost: f64,
    pub valuation: Valuation,
    pub n_max: usize,
}

/// Federated-specific settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedSection {
    pub valuation: Valuation,
    pub estimation_trials: u64,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub mechanism: MechanismMode,
    pub seed: u64,
    pub trials: u64,
    /// Where reports land; not part of the config echo, so reruns into
    /// different directories stay byte-identical.
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub agent_count: usize,
    pub agent_sizes: Vec<usize>,
    pub generator: DataGenerator,
    pub model: Option<PosteriorModel>,
    pub kappa: SplitMap,
    pub bank: FeatureBank,
    pub methods: Vec<LossMethod>,
    pub strategies: Vec<Strategy>,
    pub market: Option<MarketSection>,
    pub federated: Option<FederatedSection>,
}

impl RunConfig {
    /// The mechanism configuration this run scores with.
    pub fn mechanism_config(&self) -> MechanismConfig {
        MechanismConfig {
            mode: self.mechanism,
            model: self.model,
            bank: self.bank.clone(),
            kappa: self.kappa.clone(),
        }
    }
}

struct ConfigMap {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigMap {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: raw.trim().to_string() });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line, text: raw.trim().to_string() });
            }
            if entries.insert(key.clone(), (line, value)).is_some() {
                return Err(ConfigError::DuplicateKey { line, key });
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, value)| value)
    }

    fn require(&mut self, key: &'static str) -> Result<String, ConfigError> {
        self.take(key).ok_or(ConfigError::MissingKey { key })
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(key) = self.entries.into_keys().next() {
            return Err(ConfigError::UnknownKey { key });
        }
        Ok(())
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| invalid(key, format!("cannot parse {value:?}")))
}

fn parse_valuation(key: &str, value: &str, n_max: usize) -> Result<Valuation, ConfigError> {
    let (kind, rest) = value.split_once(':').unwrap_or((value, ""));
    match kind {
        "sqrt" => Ok(Valuation::Sqrt { gamma: parse_num(key, rest)? }),
        "log" => Ok(Valuation::Log { gamma: parse_num(key, rest)? }),
        "table" => {
            let values = rest
                .split(',')
                .map(|v| parse_num(key, v.trim()))
                .collect::<Result<Vec<f64>, _>>()?;
            Ok(Valuation::Table { values })
        }
        // Saturating family Γ(1 - exp(-n/s)), materialized as a table.
        "saturating" => {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(invalid(key, "saturating needs `saturating:gamma,scale`"));
            }
            let gamma: f64 = parse_num(key, parts[0].trim())?;
            let scale: f64 = parse_num(key, parts[1].trim())?;
            if !scale.is_finite() || scale <= 0.0 {
                return Err(invalid(key, "saturating scale must be > 0"));
            }
            let values =
                (0..=n_max).map(|n| gamma * (1.0 - (-(n as f64) / scale).exp())).collect();
            Ok(Valuation::Table { values })
        }
        other => Err(invalid(key, format!("unknown valuation family {other:?}"))),
    }
}

/// Parse and validate a configuration from text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut map = ConfigMap::parse(text)?;

    let experiment = match map.require("experiment")?.as_str() {
        "synthetic" => ExperimentKind::Synthetic,
        "embedding" => ExperimentKind::Embedding,
        "marketplace" => ExperimentKind::Marketplace,
        "federated" => ExperimentKind::Federated,
        other => return Err(invalid("experiment", format!("unknown experiment {other:?}"))),
    };
    let mechanism = match map.require("mechanism")?.as_str() {
        "alg1" => MechanismMode::Alg1,
        "alg2" => MechanismMode::Alg2,
        "alg3" => MechanismMode::Alg3,
        other => return Err(invalid("mechanism", format!("unknown mechanism {other:?}"))),
    };
    let seed: u64 = {
        let raw = map.require("seed")?;
        parse_num("seed", &raw)?
    };
    let trials: u64 = match map.take("trials") {
        Some(raw) => parse_num("trials", &raw)?,
        None => 10_000,
    };
    if trials < 2 {
        return Err(invalid("trials", "need at least 2 trials"));
    }
    let out_dir = PathBuf::from(map.take("out_dir").unwrap_or_else(|| "out".to_string()));

    let agent_count: usize = {
        let raw = map.require("agents.count")?;
        parse_num("agents.count", &raw)?
    };
    if agent_count < 2 {
        return Err(invalid("agents.count", "need at least 2 agents"));
    }
    let agent_sizes: Vec<usize> = {
        let raw = map.require("agents.sizes")?;
        let parts: Vec<usize> = raw
            .split(',')
            .map(|v| parse_num("agents.sizes", v.trim()))
            .collect::<Result<_, _>>()?;
        match parts.len() {
            1 => vec![parts[0]; agent_count],
            n if n == agent_count => parts,
            n => {
                return Err(invalid(
                    "agents.sizes",
                    format!("{n} sizes for {agent_count} agents"),
                ))
            }
        }
    };

    // Generator.
    let generator = match map.require("generator.kind")?.as_str() {
        "bayesian" => {
            let model = parse_model(&mut map)?;
            DataGenerator::Bayesian { model }
        }
        "uniform" => DataGenerator::Frequentist {
            dist: ScalarDistribution::Uniform {
                low: parse_num("generator.low", &map.require("generator.low")?)?,
                high: parse_num("generator.high", &map.require("generator.high")?)?,
            },
        },
        "normal" => DataGenerator::Frequentist {
            dist: ScalarDistribution::Normal {
                mean: parse_num("generator.mean", &map.require("generator.mean")?)?,
                var: parse_num("generator.var", &map.require("generator.var")?)?,
            },
        },
        "bernoulli" => DataGenerator::Frequentist {
            dist: ScalarDistribution::Bernoulli {
                p: parse_num("generator.p", &map.require("generator.p")?)?,
            },
        },
        "point_mass" => DataGenerator::Frequentist {
            dist: ScalarDistribution::PointMass {
                at: parse_num("generator.at", &map.require("generator.at")?)?,
            },
        },
        "embedding" => {
            let dim: usize = parse_num("generator.dim", &map.require("generator.dim")?)?;
            if dim == 0 {
                return Err(invalid("generator.dim", "dimension must be >= 1"));
            }
            let latent_scale: f64 = match map.take("generator.latent_scale") {
                Some(raw) => parse_num("generator.latent_scale", &raw)?,
                None => 0.0,
            };
            DataGenerator::Embedding { model: EmbeddingModel::isotropic(dim, latent_scale) }
        }
        other => return Err(invalid("generator.kind", format!("unknown generator {other:?}"))),
    };
    generator
        .validate()
        .map_err(|e| invalid("generator.kind", e.to_string()))?;

    let model = match &generator {
        DataGenerator::Bayesian { model } => Some(*model),
        _ => match map.take("model.kind") {
            // A model may also be configured for scoring non-Bayesian data.
            Some(kind) => Some(parse_model_of_kind(&mut map, &kind)?),
            None => None,
        },
    };

    // Mechanism-level consistency.
    if mechanism != MechanismMode::Alg3 && model.is_none() {
        return Err(invalid("mechanism", "alg1/alg2 need a model (model.kind or a bayesian generator)"));
    }
    if mechanism == MechanismMode::Alg1 && !generator.is_scalar() {
        return Err(invalid("mechanism", "alg1 requires scalar data"));
    }

    // Split map.
    let kappa = match map.take("kappa").as_deref().unwrap_or("zero") {
        "zero" => SplitMap::zero(),
        "balance" => SplitMap::Balance,
        other => {
            if let Some(rest) = other.strip_prefix("constant:") {
                SplitMap::Constant { value: parse_num("kappa", rest)? }
            } else if let Some(rest) = other.strip_prefix("table:") {
                let values: Vec<usize> = rest
                    .split(',')
                    .map(|v| parse_num("kappa", v.trim()))
                    .collect::<Result<_, _>>()?;
                for (n, &value) in values.iter().enumerate() {
                    // The table is indexed by pooled size n; kappa(n) < n-1.
                    if n >= 2 && value > n - 2 {
                        return Err(invalid(
                            "kappa",
                            format!("kappa({n}) = {value} violates kappa(n) < n-1"),
                        ));
                    }
                    if n < 2 && value > 0 {
                        return Err(invalid(
                            "kappa",
                            format!("kappa({n}) = {value} violates kappa(n) < n-1"),
                        ));
                    }
                }
                SplitMap::Table { values }
            } else {
                return Err(invalid("kappa", format!("unknown split map {other:?}")));
            }
        }
    };

    // Feature bank.
    let bank = match map.take("features").as_deref().unwrap_or("identity") {
        "identity" => {
            if !generator.is_scalar() {
                return Err(invalid("features", "identity features need scalar data"));
            }
            FeatureBank::identity()
        }
        other => {
            if let Some(rest) = other.strip_prefix("coordinates:") {
                let dim: usize = parse_num("features", rest)?;
                FeatureBank::coordinates(dim).map_err(|e| invalid("features", e.to_string()))?
            } else {
                return Err(invalid("features", format!("unknown feature spec {other:?}")));
            }
        }
    };

    let mechanism_method = LossMethod::Mechanism {
        config: MechanismConfig { mode: mechanism, model, bank: bank.clone(), kappa: kappa.clone() },
    };

    // Scoring methods: the configured mechanism plus baselines.
    let methods = match map.take("methods") {
        None => vec![mechanism_method.clone()],
        Some(raw) => raw
            .split(',')
            .map(|name| match name.trim() {
                "mechanism" | "alg1" | "alg2" | "alg3" => Ok(mechanism_method.clone()),
                "cvm" => Ok(LossMethod::Baseline { kind: BaselineKind::Cvm, bank: bank.clone() }),
                "ks" => Ok(LossMethod::Baseline { kind: BaselineKind::Ks, bank: bank.clone() }),
                "mean_diff" => {
                    Ok(LossMethod::Baseline { kind: BaselineKind::MeanDiff, bank: bank.clone() })
                }
                other => Err(invalid("methods", format!("unknown method {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
    };

    // Strategies.
    let count_rule = match map.take("strategy.count_rule") {
        None => CountRule::default(),
        Some(raw) => {
            if let Some(rest) = raw.strip_prefix("fraction:") {
                CountRule::Fraction { value: parse_num("strategy.count_rule", rest)? }
            } else if let Some(rest) = raw.strip_prefix("absolute:") {
                CountRule::Absolute { value: parse_num("strategy.count_rule", rest)? }
            } else {
                return Err(invalid("strategy.count_rule", "use fraction:<f> or absolute:<k>"));
            }
        }
    };
    let shift_delta: f64 = match map.take("strategy.shift") {
        Some(raw) => parse_num("strategy.shift", &raw)?,
        None => 0.5,
    };
    let embed_shift: f64 = match map.take("strategy.embed_shift") {
        Some(raw) => parse_num("strategy.embed_shift", &raw)?,
        None => 0.5,
    };
    let embed_shift_coords: usize = match map.take("strategy.embed_shift_coords") {
        Some(raw) => parse_num("strategy.embed_shift_coords", &raw)?,
        None => 0,
    };
    let embed_scale: f64 = match map.take("strategy.embed_scale") {
        Some(raw) => parse_num("strategy.embed_scale", &raw)?,
        None => 1.0,
    };

    let strategies = match map.take("strategies") {
        None => vec![Strategy::Truthful],
        Some(raw) => raw
            .split(',')
            .map(|name| match name.trim() {
                "truthful" => Ok(Strategy::Truthful),
                "bern_half" => Ok(Strategy::BernHalfAugment { count: count_rule }),
                "bern_plugin" => Ok(Strategy::BernPluginAugment { count: count_rule }),
                "midpoint_insert" => Ok(Strategy::MidpointInsert),
                "duplicate" => Ok(Strategy::DuplicateAugment { count: count_rule }),
                "shift_all" => Ok(Strategy::ShiftAll { delta: shift_delta }),
                "embedding_fabricate" => {
                    let dim = match &generator {
                        DataGenerator::Embedding { model } => model.dim,
                        _ => {
                            return Err(invalid(
                                "strategies",
                                "embedding_fabricate needs an embedding generator",
                            ))
                        }
                    };
                    if embed_shift_coords > dim {
                        return Err(invalid(
                            "strategy.embed_shift_coords",
                            format!("{embed_shift_coords} coords exceed dimension {dim}"),
                        ));
                    }
                    let coords = if embed_shift_coords == 0 { dim } else { embed_shift_coords };
                    let mut shift = vec![0.0; dim];
                    for value in shift.iter_mut().take(coords) {
                        *value = embed_shift;
                    }
                    Ok(Strategy::EmbeddingFabricate { shift, scale: embed_scale, count: count_rule })
                }
                other => Err(invalid("strategies", format!("unknown strategy {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
    };

    // Application sections.
    let market = if experiment == ExperimentKind::Marketplace {
        let n_max: usize = parse_num("market.n_max", &map.require("market.n_max")?)?;
        Some(MarketSection {
            cost: parse_num("market.cost", &map.require("market.cost")?)?,
            valuation: parse_valuation("market.valuation", &map.require("market.valuation")?, n_max)?,
            n_max,
        })
    } else {
        None
    };
    let federated = if experiment == ExperimentKind::Federated {
        let total: usize = agent_sizes.iter().sum();
        Some(FederatedSection {
            valuation: parse_valuation(
                "federated.valuation",
                &map.require("federated.valuation")?,
                total,
            )?,
            estimation_trials: match map.take("federated.estimation_trials") {
                Some(raw) => parse_num("federated.estimation_trials", &raw)?,
                None => 20_000,
            },
        })
    } else {
        None
    };

    map.finish()?;

    Ok(RunConfig {
        experiment,
        mechanism,
        seed,
        trials,
        out_dir,
        agent_count,
        agent_sizes,
        generator,
        model,
        kappa,
        bank,
        methods,
        strategies,
        market,
        federated,
    })
}

fn parse_model(map: &mut ConfigMap) -> Result<PosteriorModel, ConfigError> {
    let kind = map.require("model.kind")?;
    parse_model_of_kind(map, &kind)
}

fn parse_model_of_kind(map: &mut ConfigMap, kind: &str) -> Result<PosteriorModel, ConfigError> {
    match kind {
        "beta_bernoulli" => {
            let alpha: f64 = parse_num("model.alpha", &map.require("model.alpha")?)?;
            let beta: f64 = parse_num("model.beta", &map.require("model.beta")?)?;
            let model = BetaBernoulliModel::new(alpha, beta)
                .map_err(|e| invalid("model.alpha", e.to_string()))?;
            Ok(PosteriorModel::BetaBernoulli(model))
        }
        "normal_normal" => {
            let prior_mean: f64 = parse_num("model.prior_mean", &map.require("model.prior_mean")?)?;
            let prior_var: f64 = parse_num("model.prior_var", &map.require("model.prior_var")?)?;
            let obs_var: f64 = parse_num("model.obs_var", &map.require("model.obs_var")?)?;
            let model = NormalNormalModel::new(prior_mean, prior_var, obs_var)
                .map_err(|e| invalid("model.prior_var", e.to_string()))?;
            Ok(PosteriorModel::NormalNormal(model))
        }
        other => Err(invalid("model.kind", format!("unknown model {other:?}"))),
    }
}

/// Load a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}
